//! Exact polarization recursion for the binary erasure channel.
//!
//! One level of splitting maps `BEC(ε)` to `ℓ` erasure channels whose
//! parameters are computed by enumerating the `2^ℓ` erasure patterns and
//! testing GF(2) recoverability of each input. Sub-channels of a BEC are
//! again BECs (each input is either determined by the unerased coordinates
//! or conditionally uniform); this is validated against the general
//! `split_tilde` machinery in the acceptance suite rather than assumed.

use std::collections::HashMap;

use crate::channel::kahan_sum;
use crate::gf2::{is_recoverable, unit_diagonalize, BitMatrix};
use crate::{Error, Result, BEC_LEAF_CAP};

/// All `ℓⁿ` exact leaf erasure probabilities of an `n`-level evolution,
/// indexed by base-`ℓ` path digits (most significant digit = level 1).
#[derive(Clone, Debug)]
pub struct ErasureVector {
    pub ell: usize,
    pub level: usize,
    pub eps: Vec<f64>,
}

impl ErasureVector {
    pub fn mean(&self) -> f64 {
        kahan_sum(self.eps.iter().copied()) / self.eps.len() as f64
    }
}

/// Erasure probability of sub-channel `i` (0-based) after one split of
/// `BEC(eps)` through `G`: the probability mass of erasure patterns from
/// which `u_i` cannot be recovered.
pub fn bec_split_one(g: &BitMatrix, i: usize, eps: f64) -> Result<f64> {
    let sigma = unit_diagonalize(g)?;
    bec_split_one_diag(&g.permute_cols(&sigma), i, eps)
}

fn bec_split_one_diag(gd: &BitMatrix, i: usize, eps: f64) -> Result<f64> {
    let l = gd.rows();
    if i >= l {
        return Err(Error::InvalidArgument(format!("index {i} out of 0..{l}")));
    }
    let mut unerased = Vec::with_capacity(l);
    let terms = (0u32..1 << l).map(|pattern| {
        // bit j set = coordinate j erased
        let erased = pattern.count_ones() as i32;
        unerased.clear();
        unerased.extend((0..l).filter(|&j| pattern >> j & 1 == 0));
        if is_recoverable(gd, i, &unerased) {
            0.0
        } else {
            eps.powi(erased) * (1.0 - eps).powi(l as i32 - erased)
        }
    });
    Ok(kahan_sum(terms))
}

/// One full level: the `ℓ` child erasure probabilities of `BEC(eps)`.
pub fn bec_split_all(g: &BitMatrix, eps: f64) -> Result<Vec<f64>> {
    let sigma = unit_diagonalize(g)?;
    let gd = g.permute_cols(&sigma);
    (0..g.rows()).map(|i| bec_split_one_diag(&gd, i, eps)).collect()
}

/// Exact `n`-level evolution of `BEC(eps0)` under a single kernel.
pub fn bec_polarize(g: &BitMatrix, eps0: f64, n: usize) -> Result<ErasureVector> {
    let l = g.rows();
    let leaves = l
        .checked_pow(n as u32)
        .filter(|&s| s <= BEC_LEAF_CAP)
        .ok_or(Error::SizeCap { needed: usize::MAX, cap: BEC_LEAF_CAP })?;
    let _ = leaves;
    let eps = bec_polarize_mixed(&vec![g.clone(); n], eps0)?;
    Ok(ErasureVector { ell: l, level: n, eps })
}

/// Exact evolution under a per-level kernel sequence; leaf count is the
/// product of the kernel sizes. Splits are memoized per level on bitwise
/// float equality of the parent value.
pub fn bec_polarize_mixed(kernels: &[BitMatrix], eps0: f64) -> Result<Vec<f64>> {
    let total: usize = kernels
        .iter()
        .try_fold(1usize, |acc, g| acc.checked_mul(g.rows()))
        .filter(|&s| s <= BEC_LEAF_CAP)
        .ok_or(Error::SizeCap { needed: usize::MAX, cap: BEC_LEAF_CAP })?;
    let _ = total;
    let mut level = vec![eps0];
    for g in kernels {
        let sigma = unit_diagonalize(g)?;
        let gd = g.permute_cols(&sigma);
        let l = gd.rows();
        let mut memo: HashMap<u64, Vec<f64>> = HashMap::new();
        let mut next = Vec::with_capacity(level.len() * l);
        for &eps in &level {
            let children = match memo.get(&eps.to_bits()) {
                Some(c) => c.clone(),
                None => {
                    let c: Vec<f64> =
                        (0..l).map(|i| bec_split_one_diag(&gd, i, eps)).collect::<Result<_>>()?;
                    memo.insert(eps.to_bits(), c.clone());
                    c
                }
            };
            next.extend(children);
        }
        level = next;
    }
    Ok(level)
}

/// Fraction of leaves whose capacity `1 − ε` lies strictly inside
/// `(δ, 1−δ)` — the unpolarized mass of Theorem 1.
pub fn polarization_fraction(v: &ErasureVector, delta: f64) -> f64 {
    let count = v
        .eps
        .iter()
        .filter(|&&e| {
            let i = 1.0 - e;
            i > delta && i < 1.0 - delta
        })
        .count();
    count as f64 / v.eps.len() as f64
}

/// Fraction of leaves with `ε ≤ 2^(−ℓ^(nβ))` — the Theorem 2 statistic,
/// which converges to `I(W)` for `β < 1/ℓ`.
pub fn rate_statistic(v: &ErasureVector, beta: f64) -> f64 {
    let exponent = (v.ell as f64).powf(v.level as f64 * beta);
    let threshold = 2f64.powf(-exponent);
    let count = v.eps.iter().filter(|&&e| e <= threshold).count();
    count as f64 / v.eps.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2::g2;

    #[test]
    fn g2_split_closed_forms() {
        for eps in [0.0, 0.1, 0.5, 0.9, 1.0] {
            let e1 = bec_split_one(&g2(), 0, eps).unwrap();
            let e2 = bec_split_one(&g2(), 1, eps).unwrap();
            assert!((e1 - (2.0 * eps - eps * eps)).abs() < 1e-12);
            assert!((e2 - eps * eps).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_endpoints() {
        let g = BitMatrix::from_rows(&["100", "110", "101"]).unwrap();
        for i in 0..3 {
            assert_eq!(bec_split_one(&g, i, 0.0).unwrap(), 0.0);
            assert_eq!(bec_split_one(&g, i, 1.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn chain_rule_mean_preserved() {
        let g = BitMatrix::from_rows(&["110", "011", "111"]).unwrap();
        for eps in [0.2, 0.5, 0.8] {
            let children = bec_split_all(&g, eps).unwrap();
            let mean: f64 = children.iter().sum::<f64>() / 3.0;
            assert!((mean - eps).abs() < 1e-12);
        }
    }

    #[test]
    fn upper_triangular_is_inert() {
        let g = BitMatrix::from_rows(&["110", "011", "001"]).unwrap();
        let children = bec_split_all(&g, 0.37).unwrap();
        for c in children {
            assert!((c - 0.37).abs() < 1e-12);
        }
        let v = bec_polarize(&g, 0.37, 4).unwrap();
        assert!(v.eps.iter().all(|&e| (e - 0.37).abs() < 1e-12));
    }

    #[test]
    fn polarize_two_levels_g2() {
        let v = bec_polarize(&g2(), 0.5, 2).unwrap();
        let expect = [0.9375, 0.5625, 0.4375, 0.0625];
        assert_eq!(v.eps.len(), 4);
        for (got, want) in v.eps.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((v.mean() - 0.5).abs() < 1e-12);
        // n = 1 equals bec_split_all
        let v1 = bec_polarize(&g2(), 0.3, 1).unwrap();
        assert_eq!(v1.eps, bec_split_all(&g2(), 0.3).unwrap());
    }

    #[test]
    fn mean_preserved_at_depth() {
        let g = BitMatrix::from_rows(&["100", "110", "111"]).unwrap();
        for n in 1..=6 {
            let v = bec_polarize(&g, 0.4, n).unwrap();
            assert!((v.mean() - 0.4).abs() < 1e-9);
        }
    }

    #[test]
    fn polarization_fraction_cases() {
        let v = ErasureVector { ell: 2, level: 1, eps: vec![0.0, 1.0] };
        assert_eq!(polarization_fraction(&v, 0.1), 0.0);
        let v = ErasureVector { ell: 2, level: 1, eps: vec![0.5, 0.5] };
        assert_eq!(polarization_fraction(&v, 0.1), 1.0);
        // strictly decreasing mid-fraction for G2 on BEC(0.5)
        let mut last = f64::INFINITY;
        for n in [4, 6, 8, 10] {
            let v = bec_polarize(&g2(), 0.5, n).unwrap();
            let frac = polarization_fraction(&v, 0.1);
            assert!(frac < last);
            last = frac;
        }
    }

    #[test]
    fn rate_statistic_cases() {
        let v = ErasureVector { ell: 2, level: 0, eps: vec![0.4] };
        assert_eq!(rate_statistic(&v, 0.25), 1.0); // threshold 2^-1 = 0.5
        let v = ErasureVector { ell: 2, level: 0, eps: vec![0.6] };
        assert_eq!(rate_statistic(&v, 0.25), 0.0);
        // converges toward I(W) = 0.5 and small beta dominates at fixed n
        let v = bec_polarize(&g2(), 0.5, 16).unwrap();
        let small = rate_statistic(&v, 0.1);
        let large = rate_statistic(&v, 0.45);
        assert!((small - 0.5).abs() < 0.1);
        assert!(small >= large);
    }

    #[test]
    fn mixed_kernel_mean_preserved() {
        let g3 = BitMatrix::from_rows(&["100", "110", "101"]).unwrap();
        let eps = bec_polarize_mixed(&[g2(), g3, g2()], 0.5).unwrap();
        assert_eq!(eps.len(), 12);
        let mean = kahan_sum(eps.iter().copied()) / 12.0;
        assert!((mean - 0.5).abs() < 1e-12);
    }

    #[test]
    fn leaf_cap_enforced() {
        assert!(matches!(
            bec_polarize(&g2(), 0.5, 60),
            Err(Error::SizeCap { .. })
        ));
    }
}

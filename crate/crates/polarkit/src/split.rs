//! Exact one-level channel splitting and capped multi-level recursion.
//!
//! `split_tilde` builds the synthesized channel seen by input `i` when the
//! earlier inputs are pinned to zero and the later ones are marginalized
//! uniformly; for symmetric `W` it carries the same `(I, Z)` as the full
//! joint-output channel `split_joint`, which is kept as a validation
//! oracle for small `ℓ`. Splits operate on the unit-diagonalized form of
//! the kernel; `SplitResult` reports the permutation used.

use crate::channel::{kahan_add, BinaryChannel, InfoPair};
use crate::gf2::{unit_diagonalize, BitMatrix, ColumnPermutation};
use crate::{Error, Result, ALPHABET_CAP};

/// The `ℓ` sub-channels of one splitting level, post-merge, with their
/// `(I, Z)` pairs and the diagonalizing column permutation applied.
#[derive(Clone, Debug)]
pub struct SplitResult {
    pub permutation: ColumnPermutation,
    pub subchannels: Vec<BinaryChannel>,
    pub info: Vec<InfoPair>,
}

/// Accumulator with compensated summation per slot, for the marginal sums.
struct KahanVec {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl KahanVec {
    fn new(len: usize) -> Self {
        Self { sum: vec![0.0; len], comp: vec![0.0; len] }
    }

    fn add_scaled(&mut self, base: usize, stride: usize, values: &[f64], scale: f64) {
        for (t, &v) in values.iter().enumerate() {
            kahan_add(&mut self.sum[base + t * stride], &mut self.comp[base + t * stride], v * scale);
        }
    }
}

fn require_symmetric(w: &BinaryChannel) -> Result<()> {
    if w.is_symmetric() {
        Ok(())
    } else {
        Err(Error::NotSymmetric)
    }
}

fn diagonalized(g: &BitMatrix) -> Result<(BitMatrix, ColumnPermutation)> {
    let sigma = unit_diagonalize(g)?;
    Ok((g.permute_cols(&sigma), sigma))
}

/// Product distribution over `𝒴^ℓ` of the rows selected by codeword `x`,
/// row-major indexed (first coordinate most significant).
fn product_row(w: &BinaryChannel, x: &[u8]) -> Vec<f64> {
    let mut dist = vec![1.0];
    for &bit in x {
        let row = w.row(bit);
        let mut next = Vec::with_capacity(dist.len() * row.len());
        for &d in &dist {
            for &r in row {
                next.push(d * r);
            }
        }
        dist = next;
    }
    dist
}

/// The channel `W̃^(i)` (0-based `i`): inputs before `i` pinned to zero,
/// inputs after `i` marginalized uniformly, outputs `y_1^ℓ`. Requires
/// symmetric `W`; returned post-merge with a symmetry witness attached.
pub fn split_tilde(w: &BinaryChannel, g: &BitMatrix, i: usize) -> Result<BinaryChannel> {
    require_symmetric(w)?;
    let (gd, _) = diagonalized(g)?;
    split_tilde_diag(w, &gd, i)
}

/// As [`split_tilde`] but assumes `g` already has a unit diagonal.
pub(crate) fn split_tilde_diag(w: &BinaryChannel, gd: &BitMatrix, i: usize) -> Result<BinaryChannel> {
    let l = gd.rows();
    if i >= l {
        return Err(Error::InvalidArgument(format!("index {i} out of 0..{l}")));
    }
    let m = w.output_count();
    let size = m.checked_pow(l as u32).filter(|&s| s <= ALPHABET_CAP).ok_or(
        Error::AlphabetCap { needed: usize::MAX, cap: ALPHABET_CAP },
    )?;
    let free = l - 1 - i;
    let scale = 1.0 / (1u64 << free) as f64;
    let mut rows = Vec::with_capacity(2);
    for b in 0..2u8 {
        let mut acc = KahanVec::new(size);
        let mut u = vec![0u8; l];
        u[i] = b;
        for suffix in 0..1u64 << free {
            for t in 0..free {
                u[i + 1 + t] = (suffix >> t & 1) as u8;
            }
            let x = gd.vec_mul(&u)?;
            acc.add_scaled(0, 1, &product_row(w, &x), scale);
        }
        rows.push(acc.sum);
    }
    let p1 = rows.pop().unwrap();
    let p0 = rows.pop().unwrap();
    Ok(BinaryChannel::new(p0, p1)?.merge_equivalent_outputs())
}

/// The full joint-output channel `W^(i)` with outputs `(y_1^ℓ, u_1^{i−1})`
/// and all non-`i` inputs marginalized at weight `2^{−(ℓ−1)}`. Does not
/// require symmetry; intended as the Observation-1 oracle for small `ℓ`.
pub fn split_joint(w: &BinaryChannel, g: &BitMatrix, i: usize) -> Result<BinaryChannel> {
    let (gd, _) = diagonalized(g)?;
    let l = gd.rows();
    if i >= l {
        return Err(Error::InvalidArgument(format!("index {i} out of 0..{l}")));
    }
    let m = w.output_count();
    let prefix_count = 1usize << i;
    let size = m
        .checked_pow(l as u32)
        .and_then(|s| s.checked_mul(prefix_count))
        .filter(|&s| s <= ALPHABET_CAP)
        .ok_or(Error::AlphabetCap { needed: usize::MAX, cap: ALPHABET_CAP })?;
    let free = l - 1 - i;
    let scale = 1.0 / (1u64 << (l - 1)) as f64;
    let mut rows = Vec::with_capacity(2);
    for b in 0..2u8 {
        let mut acc = KahanVec::new(size);
        let mut u = vec![0u8; l];
        u[i] = b;
        for prefix in 0..prefix_count as u64 {
            for t in 0..i {
                u[t] = (prefix >> t & 1) as u8;
            }
            for suffix in 0..1u64 << free {
                for t in 0..free {
                    u[i + 1 + t] = (suffix >> t & 1) as u8;
                }
                let x = gd.vec_mul(&u)?;
                // output index = y_index * prefix_count + prefix
                acc.add_scaled(prefix as usize, prefix_count, &product_row(w, &x), scale);
            }
        }
        rows.push(acc.sum);
    }
    let p1 = rows.pop().unwrap();
    let p0 = rows.pop().unwrap();
    Ok(BinaryChannel::new(p0, p1)?.merge_equivalent_outputs())
}

/// All `ℓ` sub-channels of one level with their `(I, Z)` pairs. Enforces
/// the chain rule `Σ I^(i) = ℓ·I(W)` to 1e-9 before returning.
pub fn split_all(w: &BinaryChannel, g: &BitMatrix) -> Result<SplitResult> {
    require_symmetric(w)?;
    let (gd, sigma) = diagonalized(g)?;
    let l = gd.rows();
    let subchannels: Vec<BinaryChannel> = (0..l)
        .map(|i| split_tilde_diag(w, &gd, i))
        .collect::<Result<_>>()?;
    let info: Vec<InfoPair> = subchannels.iter().map(BinaryChannel::info_pair).collect();
    let mean: f64 = info.iter().map(|p| p.mutual_info).sum::<f64>() / l as f64;
    let residual = (mean - w.symmetric_capacity()).abs();
    if residual > 1e-9 {
        return Err(Error::Numeric(format!(
            "chain rule violated: mean I deviates by {residual:.3e}"
        )));
    }
    Ok(SplitResult { permutation: sigma, subchannels, info })
}

/// `n` levels of splitting, leaves in path order (`digit t` = branch at
/// level `t`, most significant first). Fails with the achieved depth when
/// an intermediate alphabet exceeds `cap`.
pub fn recursive_polarize(
    w: &BinaryChannel,
    g: &BitMatrix,
    n: usize,
    cap: usize,
) -> Result<Vec<InfoPair>> {
    require_symmetric(w)?;
    let (gd, _) = diagonalized(g)?;
    let l = gd.rows();
    let mut level = vec![w.clone().attach_symmetry()];
    for depth in 0..n {
        let mut next = Vec::with_capacity(level.len() * l);
        for ch in &level {
            let m = ch.output_count();
            if m.checked_pow(l as u32).map_or(true, |s| s > cap) {
                return Err(Error::DepthCap { achieved: depth, requested: n });
            }
            for i in 0..l {
                next.push(split_tilde_diag(ch, &gd, i)?);
            }
        }
        level = next;
    }
    Ok(level.iter().map(BinaryChannel::info_pair).collect())
}

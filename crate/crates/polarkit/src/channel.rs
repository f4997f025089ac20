//! Finite binary-input channels with exact information measures.
//!
//! A channel is stored as two probability rows over an indexed output
//! alphabet, optionally carrying an output involution that witnesses
//! symmetry. All measures here (`I`, `Z`, entropies) are exact sums over
//! the finite alphabet; nothing is estimated.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, ALPHABET_CAP};

/// Tolerance for probability normalization checks.
const SUM_TOL: f64 = 1e-12;
/// Tolerance for symmetry-witness entry comparison.
const SYM_TOL: f64 = 1e-12;
/// Relative tolerance for likelihood-class merging.
const MERGE_TOL: f64 = 1e-12;

/// The pair `(I(W), Z(W))` of a channel.
///
/// For any binary-input channel: `I² + Z² ≤ 1` and `I + Z ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfoPair {
    pub mutual_info: f64,
    pub bhattacharyya: f64,
}

impl InfoPair {
    /// Checks both polarization inequalities within `tol`.
    pub fn satisfies_bounds(&self, tol: f64) -> bool {
        let i = self.mutual_info;
        let z = self.bhattacharyya;
        (-tol..=1.0 + tol).contains(&i)
            && (-tol..=1.0 + tol).contains(&z)
            && i * i + z * z <= 1.0 + tol
            && i + z >= 1.0 - tol
    }
}

/// A binary-input channel `W: {0,1} → 𝒴` over a finite indexed alphabet.
#[derive(Clone, Debug)]
pub struct BinaryChannel {
    p0: Vec<f64>,
    p1: Vec<f64>,
    symmetry: Option<Vec<usize>>,
}

/// On-disk JSON form: `{"outputs": m, "p0": [...], "p1": [...], "symmetry": [...]?}`.
#[derive(Serialize, Deserialize)]
struct ChannelJson {
    outputs: usize,
    p0: Vec<f64>,
    p1: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    symmetry: Option<Vec<usize>>,
}

impl BinaryChannel {
    /// Builds a channel from its two transition rows, validating that each
    /// row is a probability vector. No symmetry witness is attached; call
    /// [`BinaryChannel::attach_symmetry`] to search for one.
    pub fn new(p0: Vec<f64>, p1: Vec<f64>) -> Result<Self> {
        if p0.len() != p1.len() {
            return Err(Error::LengthMismatch {
                expected: p0.len(),
                got: p1.len(),
            });
        }
        if p0.is_empty() {
            return Err(Error::InvalidChannel("empty output alphabet".into()));
        }
        for row in [&p0, &p1] {
            if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                return Err(Error::InvalidChannel("negative or non-finite entry".into()));
            }
            let s: f64 = kahan_sum(row.iter().copied());
            if (s - 1.0).abs() > SUM_TOL {
                return Err(Error::InvalidChannel(format!("row sums to {s}, not 1")));
            }
        }
        Ok(Self { p0, p1, symmetry: None })
    }

    /// As [`BinaryChannel::new`] but with an explicit symmetry witness,
    /// which is validated (involution, `p0[y] = p1[π(y)]`).
    pub fn with_symmetry(p0: Vec<f64>, p1: Vec<f64>, perm: Vec<usize>) -> Result<Self> {
        let mut ch = Self::new(p0, p1)?;
        if !ch.check_witness(&perm) {
            return Err(Error::InvalidChannel("invalid symmetry witness".into()));
        }
        ch.symmetry = Some(perm);
        Ok(ch)
    }

    fn check_witness(&self, perm: &[usize]) -> bool {
        let m = self.p0.len();
        if perm.len() != m {
            return false;
        }
        let mut seen = vec![false; m];
        for (y, &py) in perm.iter().enumerate() {
            if py >= m || seen[py] || perm[py] != y {
                return false;
            }
            seen[py] = true;
            if (self.p0[y] - self.p1[py]).abs() > SYM_TOL {
                return false;
            }
        }
        true
    }

    /// Binary symmetric channel with crossover `ε ∈ [0, 1/2]`.
    pub fn bsc(epsilon: f64) -> Result<Self> {
        check_range(epsilon, 0.0, 0.5)?;
        Self::with_symmetry(
            vec![1.0 - epsilon, epsilon],
            vec![epsilon, 1.0 - epsilon],
            vec![1, 0],
        )
    }

    /// Binary erasure channel with erasure probability `ε ∈ [0, 1]`.
    /// Outputs are indexed `{0, erasure, 1}`.
    pub fn bec(epsilon: f64) -> Result<Self> {
        check_range(epsilon, 0.0, 1.0)?;
        Self::with_symmetry(
            vec![1.0 - epsilon, epsilon, 0.0],
            vec![0.0, epsilon, 1.0 - epsilon],
            vec![2, 1, 0],
        )
    }

    pub fn output_count(&self) -> usize {
        self.p0.len()
    }

    pub fn p0(&self) -> &[f64] {
        &self.p0
    }

    pub fn p1(&self) -> &[f64] {
        &self.p1
    }

    pub fn symmetry(&self) -> Option<&[usize]> {
        self.symmetry.as_deref()
    }

    pub fn row(&self, input: u8) -> &[f64] {
        if input == 0 {
            &self.p0
        } else {
            &self.p1
        }
    }

    /// Symmetric capacity `I(W)` in bits, under uniform inputs.
    /// `0·log 0` terms contribute zero.
    pub fn symmetric_capacity(&self) -> f64 {
        let terms = (0..self.p0.len()).flat_map(|y| {
            let q = 0.5 * (self.p0[y] + self.p1[y]);
            [self.p0[y], self.p1[y]].map(move |w| {
                if w <= 0.0 {
                    0.0
                } else {
                    0.5 * w * (w / q).log2()
                }
            })
        });
        kahan_sum(terms)
    }

    /// Bhattacharyya parameter `Z(W) = Σ_y √(W(y|0)W(y|1))`.
    pub fn bhattacharyya(&self) -> f64 {
        kahan_sum(
            self.p0
                .iter()
                .zip(&self.p1)
                .map(|(&a, &b)| (a * b).sqrt()),
        )
    }

    pub fn info_pair(&self) -> InfoPair {
        InfoPair {
            mutual_info: self.symmetric_capacity(),
            bhattacharyya: self.bhattacharyya(),
        }
    }

    /// The `k`-fold product channel `W^k` over `𝒴^k`, row-major indexed
    /// (first coordinate most significant).
    pub fn product(&self, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidArgument("product requires k >= 1".into()));
        }
        let m = self.p0.len();
        let size = m
            .checked_pow(k as u32)
            .filter(|&s| s <= ALPHABET_CAP)
            .ok_or(Error::AlphabetCap {
                needed: usize::MAX,
                cap: ALPHABET_CAP,
            })?;
        let mut p0 = vec![1.0];
        let mut p1 = vec![1.0];
        for _ in 0..k {
            p0 = outer(&p0, &self.p0);
            p1 = outer(&p1, &self.p1);
        }
        debug_assert_eq!(p0.len(), size);
        let symmetry = self.symmetry.as_ref().map(|pi| {
            // coordinatewise composition: π^k(y_1..y_k) = (π(y_1)..π(y_k))
            (0..size)
                .map(|mut idx| {
                    let mut digits = vec![0usize; k];
                    for d in (0..k).rev() {
                        digits[d] = idx % m;
                        idx /= m;
                    }
                    digits.iter().fold(0, |acc, &d| acc * m + pi[d])
                })
                .collect::<Vec<_>>()
        });
        match symmetry {
            Some(pi) => Self::with_symmetry(p0, p1, pi),
            None => Self::new(p0, p1),
        }
    }

    /// Merges outputs with identical normalized likelihood pairs (relative
    /// tolerance 1e-12) and drops zero-probability outputs. Lossless for
    /// `I` and `Z`; idempotent. Output order is by ascending likelihood
    /// ratio, which makes the result canonical.
    pub fn merge_equivalent_outputs(&self) -> Self {
        let mut items: Vec<(f64, f64, f64)> = self
            .p0
            .iter()
            .zip(&self.p1)
            .filter(|(&a, &b)| a + b > 0.0)
            .map(|(&a, &b)| (a / (a + b), a, b))
            .collect();
        items.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut p0 = Vec::new();
        let mut p1 = Vec::new();
        let mut idx = 0;
        while idx < items.len() {
            let anchor = items[idx].0;
            let (mut s0, mut c0) = (0.0, 0.0);
            let (mut s1, mut c1) = (0.0, 0.0);
            while idx < items.len() && (items[idx].0 - anchor).abs() <= MERGE_TOL {
                kahan_add(&mut s0, &mut c0, items[idx].1);
                kahan_add(&mut s1, &mut c1, items[idx].2);
                idx += 1;
            }
            p0.push(s0);
            p1.push(s1);
        }
        let mut merged = Self { p0, p1, symmetry: None };
        merged.symmetry = merged.find_symmetry();
        merged
    }

    /// Searches for an involutive output permutation `π` with
    /// `p0[y] = p1[π(y)]` (entries compared within 1e-12).
    pub fn find_symmetry(&self) -> Option<Vec<usize>> {
        let m = self.p0.len();
        let mut perm = vec![usize::MAX; m];
        for y in 0..m {
            if perm[y] != usize::MAX {
                continue;
            }
            if (self.p0[y] - self.p1[y]).abs() <= SYM_TOL {
                perm[y] = y;
                continue;
            }
            let partner = (y + 1..m).find(|&z| {
                perm[z] == usize::MAX
                    && (self.p0[y] - self.p1[z]).abs() <= SYM_TOL
                    && (self.p1[y] - self.p0[z]).abs() <= SYM_TOL
            })?;
            perm[y] = partner;
            perm[partner] = y;
        }
        Some(perm)
    }

    /// Attaches a freshly-searched symmetry witness, if one exists.
    pub fn attach_symmetry(mut self) -> Self {
        if self.symmetry.is_none() {
            self.symmetry = self.find_symmetry();
        }
        self
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetry.is_some() || self.find_symmetry().is_some()
    }

    /// Deterministic random symmetric channel: a mixture of `subchannels`
    /// BSCs with simplex-uniform weights and crossovers uniform on
    /// `[0, 1/2]`. Output `2j` is (sub-channel j, bit 0), `2j+1` its flip.
    pub fn random_symmetric(seed: u64, subchannels: usize) -> Self {
        assert!(subchannels >= 1, "need at least one sub-channel");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights: Vec<f64> = (0..subchannels)
            .map(|_| -f64::ln(1.0 - rng.gen::<f64>()))
            .collect();
        let total: f64 = weights.iter().sum();
        let crossovers: Vec<f64> = (0..subchannels).map(|_| 0.5 * rng.gen::<f64>()).collect();
        let mut p0 = Vec::with_capacity(2 * subchannels);
        let mut p1 = Vec::with_capacity(2 * subchannels);
        let mut perm = Vec::with_capacity(2 * subchannels);
        for j in 0..subchannels {
            let q = weights[j] / total;
            let e = crossovers[j];
            p0.push(q * (1.0 - e));
            p0.push(q * e);
            p1.push(q * e);
            p1.push(q * (1.0 - e));
            perm.push(2 * j + 1);
            perm.push(2 * j);
        }
        // rows sum to q_j exactly term-by-term; renormalize defensively
        let s0: f64 = kahan_sum(p0.iter().copied());
        let s1: f64 = kahan_sum(p1.iter().copied());
        p0.iter_mut().for_each(|p| *p /= s0);
        p1.iter_mut().for_each(|p| *p /= s1);
        Self::with_symmetry(p0, p1, perm).expect("mixture construction is valid")
    }

    /// Recognizes (merged) erasure channels: returns the erasure probability
    /// if `W` is output-equivalent to `BEC(ε)`.
    pub fn as_bec(&self) -> Option<f64> {
        let w = self.merge_equivalent_outputs();
        let mut good0 = 0.0;
        let mut good1 = 0.0;
        let mut erased = 0.0;
        for y in 0..w.output_count() {
            let (a, b) = (w.p0[y], w.p1[y]);
            if (a - b).abs() <= SYM_TOL {
                erased += a;
            } else if b <= SYM_TOL {
                good0 += a;
            } else if a <= SYM_TOL {
                good1 += b;
            } else {
                return None;
            }
        }
        if (good0 - good1).abs() <= 1e-9 && (good0 + erased - 1.0).abs() <= 1e-9 {
            Some(erased.clamp(0.0, 1.0))
        } else {
            None
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ChannelJson {
            outputs: self.p0.len(),
            p0: self.p0.clone(),
            p1: self.p1.clone(),
            symmetry: self.symmetry.clone(),
        })
        .expect("channel serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ChannelJson = serde_json::from_str(text)
            .map_err(|e| Error::InvalidChannel(format!("bad channel JSON: {e}")))?;
        if raw.outputs != raw.p0.len() {
            return Err(Error::InvalidChannel("outputs field disagrees with p0".into()));
        }
        match raw.symmetry {
            Some(pi) => Self::with_symmetry(raw.p0, raw.p1, pi),
            None => Ok(Self::new(raw.p0, raw.p1)?.attach_symmetry()),
        }
    }
}

/// Binary entropy `h(p) = −p log2 p − (1−p) log2(1−p)`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_range(p, 0.0, 1.0)?;
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    Ok(term(p) + term(1.0 - p))
}

/// Inverse of `h` on `[0, 1/2]`, by bisection to absolute tolerance 1e-12.
/// The endpoints are returned exactly; `h` is too flat near `1/2` for the
/// bisection to resolve them in f64.
pub fn inverse_binary_entropy(t: f64) -> Result<f64> {
    check_range(t, 0.0, 1.0)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    if t == 1.0 {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..200 {
        if hi - lo <= 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if binary_entropy(mid)? < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `I(W²)` for `W = BSC(ε)`: equals `1 + h(2εε̄) − 2h(ε)`.
pub fn bsc_pair_capacity(epsilon: f64) -> Result<f64> {
    check_range(epsilon, 0.0, 0.5)?;
    let eb = 1.0 - epsilon;
    Ok(1.0 + binary_entropy(2.0 * epsilon * eb)? - 2.0 * binary_entropy(epsilon)?)
}

/// The strictly positive gap `h(2εε̄) − h(ε)` with `ε = h⁻¹(1 − I)`:
/// a lower bound on `I(W^k) − I(W)` for symmetric `W` with `I(W) = I`, `k ≥ 2`.
pub fn capacity_gap_lower_bound(mutual_info: f64) -> Result<f64> {
    if mutual_info <= 0.0 || mutual_info >= 1.0 {
        return Err(Error::OutOfRange {
            value: mutual_info,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let eps = inverse_binary_entropy(1.0 - mutual_info)?;
    Ok(binary_entropy(2.0 * eps * (1.0 - eps))? - binary_entropy(eps)?)
}

fn check_range(value: f64, lo: f64, hi: f64) -> Result<()> {
    if !(lo..=hi).contains(&value) || !value.is_finite() {
        return Err(Error::OutOfRange { value, lo, hi });
    }
    Ok(())
}

fn outer(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            out.push(x * y);
        }
    }
    out
}

pub(crate) fn kahan_sum(iter: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for x in iter {
        kahan_add(&mut s, &mut c, x);
    }
    s
}

pub(crate) fn kahan_add(sum: &mut f64, comp: &mut f64, x: f64) {
    let y = x - *comp;
    let t = *sum + y;
    *comp = (t - *sum) - y;
    *sum = t;
}

//! The randomized branch process over channel splits.
//!
//! A path draws i.i.d. uniform branch indices and follows the exact split
//! at each level; the per-level `(I, Z)` trace realizes one sample of the
//! martingale `{I_n}`. Ensemble statistics over erasure channels are
//! routed to the exact leaf distribution instead of sampling, since the
//! branch process on a BEC is exactly the uniform leaf measure.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bec::{bec_polarize, ErasureVector};
use crate::channel::{BinaryChannel, InfoPair};
use crate::gf2::{unit_diagonalize, BitMatrix};
use crate::split::{split_all, split_tilde_diag};
use crate::{splitmix64, Error, Result, ALPHABET_CAP};

/// One realization of the branch process: branch choices (0-based) and the
/// `(I, Z)` trace, entry `t` describing the channel after `t` splits.
#[derive(Clone, Debug)]
pub struct PathTrace {
    pub branches: Vec<usize>,
    pub info: Vec<InfoPair>,
    pub seed: u64,
}

/// Ensemble summary over paths (or over exact leaves for BEC inputs).
#[derive(Clone, Debug, Serialize)]
pub struct EnsembleStats {
    pub depth: usize,
    pub paths: usize,
    /// true when computed from the exact BEC leaf distribution
    pub exact: bool,
    pub mean_info: f64,
    pub fraction_high: f64,
    pub fraction_low: f64,
    pub fraction_mid: f64,
    /// `E|I_{t+1} − I_t|` per level, t = 0..depth-1
    pub step_abs_mean: Vec<f64>,
    pub var_info: f64,
}

/// Per-trace report of the two proof-idea Z bounds.
#[derive(Clone, Debug, Serialize)]
pub struct ZBoundReport {
    /// steps violating `Z_{t+1} ≤ ℓ·Z_t + 1e-9` (must be empty)
    pub factor_violations: Vec<usize>,
    /// steps with `Z_{t+1} ≤ Z_t² + 1e-12`
    pub squaring_steps: Vec<usize>,
    pub squaring_fraction: f64,
}

/// Samples one path of depth `n` with seeded uniform branches, splitting
/// exactly at each step. On an alphabet-cap failure the error reports the
/// depth reached.
pub fn sample_path(w: &BinaryChannel, g: &BitMatrix, n: usize, seed: u64) -> Result<PathTrace> {
    if !w.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let sigma = unit_diagonalize(g)?;
    let gd = g.permute_cols(&sigma);
    let l = gd.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut branches = Vec::with_capacity(n);
    let mut info = Vec::with_capacity(n + 1);
    let mut current = w.clone().attach_symmetry();
    info.push(current.info_pair());
    for depth in 0..n {
        let b = rng.gen_range(0..l);
        branches.push(b);
        current = split_tilde_diag(&current, &gd, b).map_err(|e| match e {
            Error::AlphabetCap { .. } => Error::DepthCap { achieved: depth, requested: n },
            other => other,
        })?;
        info.push(current.info_pair());
    }
    Ok(PathTrace { branches, info, seed })
}

/// Ensemble statistics of `I_n` at depth `n`. For erasure channels the
/// statistics are exact expectations over the `ℓⁿ` leaves; otherwise
/// `paths` independent traces are sampled, path `p` seeded with
/// `seed ^ splitmix64(p)` so parallel and sequential runs agree.
pub fn ensemble_stats(
    w: &BinaryChannel,
    g: &BitMatrix,
    n: usize,
    paths: usize,
    seed: u64,
    delta: f64,
) -> Result<EnsembleStats> {
    if let Some(eps0) = w.as_bec() {
        return exact_bec_stats(g, eps0, n, delta);
    }
    let mut finals = Vec::with_capacity(paths);
    let mut step_sums = vec![0.0; n];
    for p in 0..paths {
        let trace = sample_path(w, g, n, seed ^ splitmix64(p as u64))?;
        finals.push(trace.info[n].mutual_info);
        for t in 0..n {
            step_sums[t] += (trace.info[t + 1].mutual_info - trace.info[t].mutual_info).abs();
        }
    }
    Ok(summarize(
        &finals,
        &step_sums.iter().map(|s| s / paths as f64).collect::<Vec<_>>(),
        n,
        paths,
        false,
        delta,
    ))
}

fn exact_bec_stats(g: &BitMatrix, eps0: f64, n: usize, delta: f64) -> Result<EnsembleStats> {
    let mut step_means = Vec::with_capacity(n);
    let mut prev = bec_polarize(g, eps0, 0)?;
    for level in 1..=n {
        let next = bec_polarize(g, eps0, level)?;
        let l = g.rows();
        let sum: f64 = next
            .eps
            .iter()
            .enumerate()
            .map(|(idx, &e)| (prev.eps[idx / l] - e).abs())
            .sum();
        step_means.push(sum / next.eps.len() as f64);
        prev = next;
    }
    let finals: Vec<f64> = prev.eps.iter().map(|&e| 1.0 - e).collect();
    Ok(summarize(&finals, &step_means, n, finals.len(), true, delta))
}

fn summarize(
    finals: &[f64],
    step_abs_mean: &[f64],
    depth: usize,
    paths: usize,
    exact: bool,
    delta: f64,
) -> EnsembleStats {
    let count = finals.len() as f64;
    let mean: f64 = finals.iter().sum::<f64>() / count;
    let var: f64 = finals.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / count;
    let high = finals.iter().filter(|&&x| x > 1.0 - delta).count() as f64 / count;
    let low = finals.iter().filter(|&&x| x < delta).count() as f64 / count;
    EnsembleStats {
        depth,
        paths,
        exact,
        mean_info: mean,
        fraction_high: high,
        fraction_low: low,
        fraction_mid: 1.0 - high - low,
        step_abs_mean: step_abs_mean.to_vec(),
        var_info: var,
    }
}

/// The one-step conditional-expectation identity behind the martingale
/// property: `|(1/ℓ)Σᵢ I^(i) − I(W)|`, computed by exact split.
pub fn martingale_residual(w: &BinaryChannel, g: &BitMatrix) -> Result<f64> {
    let res = split_all(w, g)?;
    let mean: f64 =
        res.info.iter().map(|p| p.mutual_info).sum::<f64>() / res.info.len() as f64;
    Ok((mean - w.symmetric_capacity()).abs())
}

/// Checks the proof-idea bounds along a trace: `Z_{t+1} ≤ ℓ·Z_t` always,
/// and flags the squaring steps `Z_{t+1} ≤ Z_t²`.
pub fn z_bound_check(trace: &PathTrace, ell: usize) -> ZBoundReport {
    let mut factor_violations = Vec::new();
    let mut squaring_steps = Vec::new();
    let steps = trace.info.len().saturating_sub(1);
    for t in 0..steps {
        let z0 = trace.info[t].bhattacharyya;
        let z1 = trace.info[t + 1].bhattacharyya;
        if z1 > ell as f64 * z0 + 1e-9 {
            factor_violations.push(t);
        }
        if z1 <= z0 * z0 + 1e-12 {
            squaring_steps.push(t);
        }
    }
    let squaring_fraction = if steps == 0 {
        0.0
    } else {
        squaring_steps.len() as f64 / steps as f64
    };
    ZBoundReport { factor_violations, squaring_steps, squaring_fraction }
}

/// Exact leaf `(I, Z)` of the BEC branch process along explicit digits;
/// used to cross-check sampled traces against [`bec_polarize`].
pub fn bec_leaf_for_path(g: &BitMatrix, eps0: f64, digits: &[usize]) -> Result<ErasureVector> {
    let mut eps = eps0;
    for &d in digits {
        eps = crate::bec::bec_split_one(g, d, eps)?;
    }
    Ok(ErasureVector { ell: g.rows(), level: digits.len(), eps: vec![eps] })
}

/// Keeps `sample_path` honest against the alphabet cap by defaulting it.
pub fn default_cap() -> usize {
    ALPHABET_CAP
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2::g2;

    #[test]
    fn zero_depth_path() {
        let w = BinaryChannel::bec(0.4).unwrap();
        let trace = sample_path(&w, &g2(), 0, 1).unwrap();
        assert!(trace.branches.is_empty());
        assert_eq!(trace.info.len(), 1);
        assert!((trace.info[0].mutual_info - 0.6).abs() < 1e-12);
    }

    #[test]
    fn path_matches_exact_bec_leaf() {
        let w = BinaryChannel::bec(0.5).unwrap();
        let trace = sample_path(&w, &g2(), 6, 42).unwrap();
        let leaf = bec_leaf_for_path(&g2(), 0.5, &trace.branches).unwrap();
        assert!((trace.info[6].bhattacharyya - leaf.eps[0]).abs() < 1e-10);
        // and against the full polarize vector at the path index
        let v = bec_polarize(&g2(), 0.5, 6).unwrap();
        let idx = trace.branches.iter().fold(0, |acc, &d| acc * 2 + d);
        assert!((trace.info[6].bhattacharyya - v.eps[idx]).abs() < 1e-10);
    }

    #[test]
    fn non_polarizing_kernel_keeps_info_constant() {
        let g = BitMatrix::from_rows(&["11", "01"]).unwrap();
        let w = BinaryChannel::bsc(0.25).unwrap();
        let iw = w.symmetric_capacity();
        let trace = sample_path(&w, &g, 4, 9).unwrap();
        for p in &trace.info {
            assert!((p.mutual_info - iw).abs() < 1e-10);
        }
    }

    #[test]
    fn martingale_residual_small() {
        assert!(martingale_residual(&BinaryChannel::bec(0.37).unwrap(), &g2()).unwrap() < 1e-12);
        let g3 = BitMatrix::from_rows(&["110", "011", "111"]).unwrap();
        for seed in 1..=20 {
            let w = BinaryChannel::random_symmetric(seed, 2);
            assert!(martingale_residual(&w, &g3).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn squaring_steps_are_branch_two_for_g2_on_bec() {
        let w = BinaryChannel::bec(0.5).unwrap();
        let trace = sample_path(&w, &g2(), 8, 123).unwrap();
        let report = z_bound_check(&trace, 2);
        assert!(report.factor_violations.is_empty());
        let expected: Vec<usize> = trace
            .branches
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(t, _)| t)
            .collect();
        // branch 2 squares epsilon exactly; branch 1 may square too only by
        // coincidence, so check containment
        for t in &expected {
            assert!(report.squaring_steps.contains(t));
        }
    }

    #[test]
    fn ensemble_exact_for_bec() {
        let w = BinaryChannel::bec(0.5).unwrap();
        let stats = ensemble_stats(&w, &g2(), 10, 2000, 7, 0.1).unwrap();
        assert!(stats.exact);
        assert!((stats.mean_info - 0.5).abs() < 1e-9);
        assert!((stats.fraction_high - 0.5).abs() < 0.07);
        // mid-fraction decreasing between depths
        let shallow = ensemble_stats(&w, &g2(), 5, 0, 7, 0.1).unwrap();
        assert!(stats.fraction_mid < shallow.fraction_mid);
        // step means decay toward zero
        assert!(stats.step_abs_mean[9] < stats.step_abs_mean[0]);
    }

    #[test]
    fn ensemble_sampled_for_general_channel() {
        let w = BinaryChannel::bsc(0.11).unwrap();
        let stats = ensemble_stats(&w, &g2(), 3, 200, 5, 0.1).unwrap();
        assert!(!stats.exact);
        let iw = w.symmetric_capacity();
        // martingale mean within a CLT band
        let se = (stats.var_info / 200.0).sqrt();
        assert!((stats.mean_info - iw).abs() < 4.0 * se + 1e-6);
        // reproducible
        let again = ensemble_stats(&w, &g2(), 3, 200, 5, 0.1).unwrap();
        assert_eq!(stats.mean_info, again.mean_info);
    }

    #[test]
    fn squaring_frequency_at_least_one_over_ell() {
        let g3 = BitMatrix::from_rows(&["100", "110", "111"]).unwrap();
        let mut squaring = 0usize;
        let mut steps = 0usize;
        for p in 0..1000u64 {
            let trace = sample_path(&BinaryChannel::bec(0.5).unwrap(), &g3, 4, splitmix64(p))
                .unwrap();
            let report = z_bound_check(&trace, 3);
            assert!(report.factor_violations.is_empty());
            squaring += report.squaring_steps.len();
            steps += trace.branches.len();
        }
        let freq = squaring as f64 / steps as f64;
        assert!(freq >= 1.0 / 3.0 - 0.05, "squaring frequency {freq}");
    }
}

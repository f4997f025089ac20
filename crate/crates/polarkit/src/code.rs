//! Generalized polar codec over arbitrary (possibly mixed) kernels.
//!
//! Construction freezes the worst synthesized indices by design erasure
//! probability, encoding is the recursive Kronecker transform, and
//! decoding is successive cancellation with direct marginalization at each
//! kernel node: the belief for input `a` of an `ℓ`-ary node is the exact
//! sum over the `2^(ℓ−1−a)` completions of the undecided inputs. For
//! `ℓ = 2` this reduces to the classic f/g updates, which the tests use as
//! an oracle.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bec::bec_polarize_mixed;
use crate::channel::BinaryChannel;
use crate::gf2::{kron_encode_counted, BitMatrix};
use crate::{splitmix64, Error, Result};

/// How the per-index design reliabilities are obtained.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DesignSpec {
    /// exact erasure evolution at the given design ε
    Bec { eps: f64 },
    /// explicit per-index Z (or ε) vector, length N
    Z { z: Vec<f64> },
}

/// A constructed polar code: kernel sequence, frozen mask, design values.
#[derive(Clone, Debug)]
pub struct PolarCode {
    kernels: Vec<BitMatrix>,
    block_len: usize,
    message_len: usize,
    frozen_mask: Vec<bool>,
    frozen_values: Vec<u8>,
    design_z: Vec<f64>,
    design: DesignSpec,
}

/// Outcome of one decode.
#[derive(Clone, Debug)]
pub struct DecodeResult {
    pub u_hat: Vec<u8>,
    pub message: Vec<u8>,
    /// with genie decoding: first info index where the ML decision was wrong
    pub genie_first_error: Option<usize>,
    /// kernel-node marginalization count, for cost-scaling checks
    pub op_count: u64,
}

/// Monte Carlo transmission statistics.
#[derive(Clone, Debug, Serialize)]
pub struct SimStats {
    pub trials: usize,
    pub frame_errors: usize,
    pub bit_errors: u64,
    pub fer: f64,
    pub ber: f64,
    pub stderr: f64,
    pub union_bound: f64,
    /// genie mode: histogram of first-error u-indices
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_error_hist: Option<Vec<u64>>,
    /// per-trial bit error counts, for CSV emission
    #[serde(skip)]
    pub trial_bit_errors: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct CodeJson {
    kernels: Vec<Vec<String>>,
    n: usize,
    k: usize,
    frozen_mask: String,
    design: DesignSpec,
}

impl PolarCode {
    /// Builds a code of message length `k` by freezing the `N − k` indices
    /// with the largest design Z; ties freeze the larger index.
    pub fn construct(kernels: Vec<BitMatrix>, design: DesignSpec, k: usize) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::InvalidArgument("need at least one kernel".into()));
        }
        for g in &kernels {
            if g.rows() != g.cols() || g.rows() < 2 {
                return Err(Error::InvalidArgument("kernels must be square, ℓ ≥ 2".into()));
            }
            if !g.is_invertible() {
                return Err(Error::NotInvertible);
            }
        }
        let block_len: usize = kernels.iter().map(BitMatrix::rows).product();
        if k > block_len {
            return Err(Error::InvalidArgument(format!(
                "message length {k} exceeds blocklength {block_len}"
            )));
        }
        let design_z = match &design {
            DesignSpec::Bec { eps } => {
                if !(0.0..=1.0).contains(eps) {
                    return Err(Error::OutOfRange { value: *eps, lo: 0.0, hi: 1.0 });
                }
                bec_polarize_mixed(&kernels, *eps)?
            }
            DesignSpec::Z { z } => {
                if z.len() != block_len {
                    return Err(Error::LengthMismatch { expected: block_len, got: z.len() });
                }
                z.clone()
            }
        };
        let mut order: Vec<usize> = (0..block_len).collect();
        order.sort_by(|&a, &b| design_z[a].total_cmp(&design_z[b]).then(a.cmp(&b)));
        let mut frozen_mask = vec![true; block_len];
        for &idx in order.iter().take(k) {
            frozen_mask[idx] = false;
        }
        Ok(Self {
            kernels,
            block_len,
            message_len: k,
            frozen_mask,
            frozen_values: vec![0; block_len],
            design_z,
            design,
        })
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn message_len(&self) -> usize {
        self.message_len
    }

    pub fn frozen_mask(&self) -> &[bool] {
        &self.frozen_mask
    }

    pub fn design_z(&self) -> &[f64] {
        &self.design_z
    }

    pub fn kernels(&self) -> &[BitMatrix] {
        &self.kernels
    }

    /// Scatters the message into the unfrozen positions of `u`.
    pub fn assemble_u(&self, message: &[u8]) -> Result<Vec<u8>> {
        if message.len() != self.message_len {
            return Err(Error::LengthMismatch {
                expected: self.message_len,
                got: message.len(),
            });
        }
        let mut u = self.frozen_values.clone();
        let mut next = message.iter();
        for (i, frozen) in self.frozen_mask.iter().enumerate() {
            if !frozen {
                u[i] = *next.next().expect("popcount matches k") & 1;
            }
        }
        Ok(u)
    }

    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>> {
        let u = self.assemble_u(message)?;
        Ok(kron_encode_counted(&self.kernels, &u)?.0)
    }

    /// Successive cancellation decoding from per-position likelihood pairs
    /// `(P(y|x=0), P(y|x=1))`.
    pub fn sc_decode(&self, likelihoods: &[(f64, f64)]) -> Result<DecodeResult> {
        self.decode_inner(likelihoods, None)
    }

    /// Genie-aided decode: decisions are forced to the true `u`, recording
    /// the first index where the ML decision disagreed.
    pub fn sc_decode_genie(&self, likelihoods: &[(f64, f64)], true_u: &[u8]) -> Result<DecodeResult> {
        if true_u.len() != self.block_len {
            return Err(Error::LengthMismatch { expected: self.block_len, got: true_u.len() });
        }
        self.decode_inner(likelihoods, Some(true_u))
    }

    fn decode_inner(&self, likelihoods: &[(f64, f64)], genie: Option<&[u8]>) -> Result<DecodeResult> {
        if likelihoods.len() != self.block_len {
            return Err(Error::LengthMismatch {
                expected: self.block_len,
                got: likelihoods.len(),
            });
        }
        let beliefs: Vec<[f64; 2]> = likelihoods
            .iter()
            .map(|&(a, b)| {
                if a < 0.0 || b < 0.0 || !(a + b).is_normal() {
                    return Err(Error::InvalidArgument(
                        "likelihood pair must be nonnegative and not both zero".into(),
                    ));
                }
                Ok([a / (a + b), b / (a + b)])
            })
            .collect::<Result<_>>()?;
        let mut state = DecodeState {
            code: self,
            genie,
            next_u: 0,
            u_hat: vec![0u8; self.block_len],
            first_error: None,
            ops: 0,
        };
        state.node(0, &beliefs);
        let message: Vec<u8> = state
            .u_hat
            .iter()
            .zip(&self.frozen_mask)
            .filter(|(_, &frozen)| !frozen)
            .map(|(&b, _)| b)
            .collect();
        Ok(DecodeResult {
            u_hat: state.u_hat,
            message,
            genie_first_error: state.first_error,
            op_count: state.ops,
        })
    }

    /// `Σ design_z[i]` over information positions: an upper bound on SC
    /// block-error probability when the design values are the true
    /// per-index Z (exact for matched-BEC design).
    pub fn union_bound(&self) -> f64 {
        self.design_z
            .iter()
            .zip(&self.frozen_mask)
            .filter(|(_, &frozen)| !frozen)
            .map(|(&z, _)| z)
            .sum()
    }

    /// Monte Carlo FER/BER over seeded random messages through `channel`.
    /// Trial `t` derives its own RNG from `seed ^ splitmix64(t)`, so trial
    /// parallelism cannot change any statistic.
    pub fn simulate_fer(
        &self,
        channel: &BinaryChannel,
        trials: usize,
        seed: u64,
        genie: bool,
    ) -> Result<SimStats> {
        if trials < 1 {
            return Err(Error::InvalidArgument("trials must be >= 1".into()));
        }
        let per_trial: Vec<(bool, u64, Option<usize>)> = (0..trials)
            .into_par_iter()
            .map(|t| self.run_trial(channel, seed ^ splitmix64(t as u64), genie))
            .collect::<Result<_>>()?;
        let frame_errors = per_trial.iter().filter(|r| r.0).count();
        let bit_errors: u64 = per_trial.iter().map(|r| r.1).sum();
        let fer = frame_errors as f64 / trials as f64;
        let ber = bit_errors as f64 / (trials as f64 * self.message_len.max(1) as f64);
        let first_error_hist = genie.then(|| {
            let mut hist = vec![0u64; self.block_len];
            for r in &per_trial {
                if let Some(idx) = r.2 {
                    hist[idx] += 1;
                }
            }
            hist
        });
        Ok(SimStats {
            trials,
            frame_errors,
            bit_errors,
            fer,
            ber,
            stderr: (fer * (1.0 - fer) / trials as f64).sqrt(),
            union_bound: self.union_bound(),
            first_error_hist,
            trial_bit_errors: per_trial.iter().map(|r| r.1).collect(),
        })
    }

    fn run_trial(
        &self,
        channel: &BinaryChannel,
        trial_seed: u64,
        genie: bool,
    ) -> Result<(bool, u64, Option<usize>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
        let message: Vec<u8> = (0..self.message_len).map(|_| rng.gen_range(0..2u8)).collect();
        let u = self.assemble_u(&message)?;
        let x = kron_encode_counted(&self.kernels, &u)?.0;
        let likelihoods: Vec<(f64, f64)> = x
            .iter()
            .map(|&bit| {
                let row = channel.row(bit);
                let draw: f64 = rng.gen();
                let mut acc = 0.0;
                let mut y = row.len() - 1;
                for (idx, &p) in row.iter().enumerate() {
                    acc += p;
                    if draw < acc {
                        y = idx;
                        break;
                    }
                }
                (channel.p0()[y], channel.p1()[y])
            })
            .collect();
        let result = if genie {
            self.sc_decode_genie(&likelihoods, &u)?
        } else {
            self.sc_decode(&likelihoods)?
        };
        let bit_errs = result
            .message
            .iter()
            .zip(&message)
            .filter(|(a, b)| a != b)
            .count() as u64;
        let frame_err = if genie {
            result.genie_first_error.is_some()
        } else {
            bit_errs > 0
        };
        Ok((frame_err, bit_errs, result.genie_first_error))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&CodeJson {
            kernels: self.kernels.iter().map(BitMatrix::to_row_strings).collect(),
            n: self.block_len,
            k: self.message_len,
            frozen_mask: mask_to_hex(&self.frozen_mask),
            design: self.design.clone(),
        })
        .expect("code serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: CodeJson = serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("bad code JSON: {e}")))?;
        let kernels: Vec<BitMatrix> = raw
            .kernels
            .iter()
            .map(|rows| {
                let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
                BitMatrix::from_rows(&refs)
            })
            .collect::<Result<_>>()?;
        let code = Self::construct(kernels, raw.design, raw.k)?;
        if code.block_len != raw.n {
            return Err(Error::InvalidArgument("descriptor blocklength mismatch".into()));
        }
        if mask_to_hex(&code.frozen_mask) != raw.frozen_mask {
            return Err(Error::InvalidArgument(
                "descriptor frozen mask disagrees with reconstruction".into(),
            ));
        }
        Ok(code)
    }
}

struct DecodeState<'a> {
    code: &'a PolarCode,
    genie: Option<&'a [u8]>,
    next_u: usize,
    u_hat: Vec<u8>,
    first_error: Option<usize>,
    ops: u64,
}

impl DecodeState<'_> {
    /// Decodes the u-range of a node given beliefs on its codeword block;
    /// returns the re-encoded block (the node's codeword decision).
    fn node(&mut self, level: usize, beliefs: &[[f64; 2]]) -> Vec<u8> {
        if level == self.code.kernels.len() {
            let idx = self.next_u;
            self.next_u += 1;
            let ml = u8::from(beliefs[0][1] > beliefs[0][0]);
            let decision = if self.code.frozen_mask[idx] {
                self.code.frozen_values[idx]
            } else if let Some(truth) = self.genie {
                if ml != truth[idx] && self.first_error.is_none() {
                    self.first_error = Some(idx);
                }
                truth[idx]
            } else {
                ml
            };
            self.u_hat[idx] = decision;
            return vec![decision];
        }
        let g = &self.code.kernels[level];
        let l = g.rows();
        let m = beliefs.len() / l;
        let mut decided: Vec<Vec<u8>> = Vec::with_capacity(l);
        let mut v = vec![0u8; l];
        for a in 0..l {
            let free = l - 1 - a;
            let mut child = vec![[0.0f64; 2]; m];
            for d in 0..m {
                let mut pair = [0.0f64; 2];
                for b in 0..2u8 {
                    v[a] = b;
                    let mut total = 0.0;
                    for completion in 0..1u64 << free {
                        for t in 0..free {
                            v[a + 1 + t] = (completion >> t & 1) as u8;
                        }
                        for (t, blk) in decided.iter().enumerate() {
                            v[t] = blk[d];
                        }
                        let x = g.vec_mul(&v).expect("length fixed");
                        self.ops += 1;
                        let mut prod = 1.0;
                        for (c, &bit) in x.iter().enumerate() {
                            prod *= beliefs[c * m + d][bit as usize];
                        }
                        total += prod;
                    }
                    pair[b as usize] = total;
                }
                let s = pair[0] + pair[1];
                // renormalize; an all-zero pair means the observation was
                // impossible under every completion, treat as uninformative
                child[d] = if s > 0.0 { [pair[0] / s, pair[1] / s] } else { [0.5, 0.5] };
            }
            let block = self.node(level + 1, &child);
            decided.push(block);
        }
        let mut out = vec![0u8; beliefs.len()];
        let mut col = vec![0u8; l];
        for d in 0..m {
            for (a, blk) in decided.iter().enumerate() {
                col[a] = blk[d];
            }
            let x = g.vec_mul(&col).expect("length fixed");
            for (c, &bit) in x.iter().enumerate() {
                out[c * m + d] = bit;
            }
        }
        out
    }
}

fn mask_to_hex(mask: &[bool]) -> String {
    let mut bytes = vec![0u8; mask.len().div_ceil(8)];
    for (i, &frozen) in mask.iter().enumerate() {
        if frozen {
            bytes[i / 8] |= 1 << (7 - i % 8);
        }
    }
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// BEC transmission likelihoods for a known erasure pattern, mostly for
/// tests and the CLI `decode` command: `'0'`/`'1'` are perfect
/// observations, `'?'` is an erasure.
pub fn bec_likelihoods(received: &str) -> Result<Vec<(f64, f64)>> {
    received
        .chars()
        .map(|c| match c {
            '0' => Ok((1.0, 0.0)),
            '1' => Ok((0.0, 1.0)),
            '?' => Ok((0.5, 0.5)),
            other => Err(Error::InvalidArgument(format!("bad received symbol {other:?}"))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2::{g2, kron_power};

    fn g3() -> BitMatrix {
        BitMatrix::from_rows(&["100", "110", "101"]).unwrap()
    }

    fn noiseless_likelihoods(x: &[u8]) -> Vec<(f64, f64)> {
        x.iter().map(|&b| if b == 0 { (1.0, 0.0) } else { (0.0, 1.0) }).collect()
    }

    #[test]
    fn construct_extreme_rates() {
        let code = PolarCode::construct(vec![g2(); 2], DesignSpec::Bec { eps: 0.5 }, 4).unwrap();
        assert!(code.frozen_mask().iter().all(|&f| !f));
        let code = PolarCode::construct(vec![g2(); 2], DesignSpec::Bec { eps: 0.5 }, 0).unwrap();
        assert!(code.frozen_mask().iter().all(|&f| f));
        assert_eq!(code.union_bound(), 0.0);
        assert!(PolarCode::construct(vec![g2()], DesignSpec::Bec { eps: 0.5 }, 3).is_err());
    }

    #[test]
    fn construct_picks_best_leaf() {
        // exact n=2 design at eps 0.5: [0.9375, 0.5625, 0.4375, 0.0625]
        let code = PolarCode::construct(vec![g2(); 2], DesignSpec::Bec { eps: 0.5 }, 1).unwrap();
        assert_eq!(code.frozen_mask(), &[true, true, true, false]);
        assert!((code.union_bound() - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn tie_breaking_freezes_larger_index() {
        let z = vec![0.5, 0.25, 0.25, 0.0625];
        let code = PolarCode::construct(vec![g2(); 2], DesignSpec::Z { z }, 2).unwrap();
        // indices 1 and 2 tie at 0.25; index 1 wins the info slot
        assert_eq!(code.frozen_mask(), &[true, false, true, false]);
    }

    #[test]
    fn encode_matches_kron_oracle() {
        let code = PolarCode::construct(vec![g2(); 3], DesignSpec::Bec { eps: 0.3 }, 8).unwrap();
        let gn = kron_power(&g2(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let msg: Vec<u8> = (0..8).map(|_| rng.gen_range(0..2u8)).collect();
            let x = code.encode(&msg).unwrap();
            let u = code.assemble_u(&msg).unwrap();
            assert_eq!(x, gn.vec_mul(&u).unwrap());
        }
    }

    #[test]
    fn all_zero_message_encodes_to_zero() {
        let code = PolarCode::construct(vec![g2(); 4], DesignSpec::Bec { eps: 0.4 }, 7).unwrap();
        let x = code.encode(&vec![0; 7]).unwrap();
        assert!(x.iter().all(|&b| b == 0));
    }

    #[test]
    fn encode_injective_small() {
        let code = PolarCode::construct(vec![g2(); 2], DesignSpec::Bec { eps: 0.5 }, 4).unwrap();
        let mut seen = std::collections::HashSet::new();
        for m in 0u8..16 {
            let msg: Vec<u8> = (0..4).map(|b| m >> b & 1).collect();
            assert!(seen.insert(code.encode(&msg).unwrap()));
        }
    }

    #[test]
    fn noiseless_decode_identity() {
        let code = PolarCode::construct(vec![g2(); 4], DesignSpec::Bec { eps: 0.5 }, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let msg: Vec<u8> = (0..8).map(|_| rng.gen_range(0..2u8)).collect();
            let x = code.encode(&msg).unwrap();
            let out = code.sc_decode(&noiseless_likelihoods(&x)).unwrap();
            assert_eq!(out.message, msg);
        }
    }

    #[test]
    fn single_level_bec_erasure_hand_case() {
        // n = 1, G2, K = 1, info at index 2 (0-based 1); y1 clear, y2 erased:
        // x1 = u1 ^ u2 with u1 frozen to 0, so u2 = x1
        let code = PolarCode::construct(vec![g2()], DesignSpec::Bec { eps: 0.5 }, 1).unwrap();
        assert_eq!(code.frozen_mask(), &[true, false]);
        let x = code.encode(&[1]).unwrap();
        assert_eq!(x, vec![1, 1]);
        let lh = bec_likelihoods("1?").unwrap();
        let out = code.sc_decode(&lh).unwrap();
        assert_eq!(out.message, vec![1]);
        // the symmetric pattern decodes too
        let lh = bec_likelihoods("?1").unwrap();
        let out = code.sc_decode(&lh).unwrap();
        assert_eq!(out.message, vec![1]);
    }

    #[test]
    fn union_bound_monotone_in_k() {
        let mut last = 0.0;
        for k in 0..=8 {
            let code = PolarCode::construct(vec![g2(); 3], DesignSpec::Bec { eps: 0.4 }, k).unwrap();
            let ub = code.union_bound();
            assert!(ub >= last - 1e-15);
            last = ub;
        }
    }

    #[test]
    fn mixed_kernel_codec_roundtrip() {
        let code = PolarCode::construct(
            vec![g2(), g3(), g2()],
            DesignSpec::Bec { eps: 0.5 },
            5,
        )
        .unwrap();
        assert_eq!(code.block_len(), 12);
        let explicit = g2().kron(&g3()).kron(&g2());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let msg: Vec<u8> = (0..5).map(|_| rng.gen_range(0..2u8)).collect();
            let x = code.encode(&msg).unwrap();
            assert_eq!(x, explicit.vec_mul(&code.assemble_u(&msg).unwrap()).unwrap());
            let out = code.sc_decode(&noiseless_likelihoods(&x)).unwrap();
            assert_eq!(out.message, msg);
        }
    }

    #[test]
    fn simulate_noiseless_channel() {
        let code = PolarCode::construct(vec![g2(); 3], DesignSpec::Bec { eps: 0.3 }, 4).unwrap();
        let stats = code.simulate_fer(&BinaryChannel::bec(0.0).unwrap(), 50, 1, false).unwrap();
        assert_eq!(stats.frame_errors, 0);
        assert_eq!(stats.fer, 0.0);
    }

    #[test]
    fn simulate_deterministic_in_seed() {
        let code = PolarCode::construct(vec![g2(); 4], DesignSpec::Bec { eps: 0.5 }, 4).unwrap();
        let ch = BinaryChannel::bec(0.5).unwrap();
        let a = code.simulate_fer(&ch, 300, 9, true).unwrap();
        let b = code.simulate_fer(&ch, 300, 9, true).unwrap();
        assert_eq!(a.frame_errors, b.frame_errors);
        assert_eq!(a.first_error_hist, b.first_error_hist);
    }

    #[test]
    fn genie_histogram_only_on_info_indices() {
        let code = PolarCode::construct(vec![g2(); 4], DesignSpec::Bec { eps: 0.5 }, 6).unwrap();
        let ch = BinaryChannel::bec(0.5).unwrap();
        let stats = code.simulate_fer(&ch, 500, 77, true).unwrap();
        let hist = stats.first_error_hist.unwrap();
        for (i, &count) in hist.iter().enumerate() {
            if count > 0 {
                assert!(!code.frozen_mask()[i], "first error at frozen index {i}");
            }
        }
    }

    #[test]
    fn descriptor_roundtrip() {
        let code = PolarCode::construct(vec![g2(), g3()], DesignSpec::Bec { eps: 0.4 }, 3).unwrap();
        let j = code.to_json();
        let back = PolarCode::from_json(&j).unwrap();
        assert_eq!(back.frozen_mask(), code.frozen_mask());
        assert_eq!(back.block_len(), code.block_len());
        assert!(PolarCode::from_json("{}").is_err());
    }

    #[test]
    fn decode_rejects_malformed_likelihoods() {
        let code = PolarCode::construct(vec![g2()], DesignSpec::Bec { eps: 0.5 }, 1).unwrap();
        assert!(code.sc_decode(&[(1.0, 0.0)]).is_err());
        assert!(code.sc_decode(&[(0.0, 0.0), (1.0, 0.0)]).is_err());
        assert!(code.sc_decode(&[(-1.0, 0.5), (1.0, 0.0)]).is_err());
    }
}

//! Channel polarization under arbitrary `ℓ×ℓ` GF(2) kernels.
//!
//! The library covers five layers:
//!
//! * [`channel`] — finite binary-input channels with exact mutual information
//!   and Bhattacharyya computations, including the BSC-extremality formulas.
//! * [`gf2`] — packed bit matrices: rank, unit-diagonalization, the
//!   polarizing-kernel decision, Kronecker transforms, erasure recoverability.
//! * [`split`] — exact one-level channel splitting `W → (W̃^(1)..W̃^(ℓ))` and
//!   capped multi-level recursion for general symmetric channels.
//! * [`bec`] — exact deep polarization recursion specialized to the binary
//!   erasure channel, where sub-channels stay erasure channels.
//! * [`tree`] — the randomized branch process over splits, with martingale
//!   and Z-bound diagnostics.
//! * [`code`] — a generalized polar codec: construction by worst-Z freezing,
//!   `O(N log N)` encoding, successive cancellation decoding for arbitrary
//!   (possibly mixed) kernels, and Monte Carlo FER measurement.

pub mod bec;
pub mod channel;
pub mod code;
pub mod gf2;
pub mod report;
pub mod split;
pub mod tree;

pub use channel::{BinaryChannel, InfoPair};
pub use gf2::{BitMatrix, ColumnPermutation};

/// Hard cap on materialized output alphabets. Operations that would need
/// more outputs than this fail instead of approximating.
pub const ALPHABET_CAP: usize = 1_000_000;

/// Cap on exact BEC evolution leaf counts.
pub const BEC_LEAF_CAP: usize = 10_000_000;

/// Errors shared across all modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("value {value} outside [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("channel is not symmetric")]
    NotSymmetric,
    #[error("matrix is not invertible over GF(2)")]
    NotInvertible,
    #[error("matrix is not polarizing")]
    NotPolarizing,
    #[error("output alphabet would need {needed} symbols (cap {cap})")]
    AlphabetCap { needed: usize, cap: usize },
    #[error("size {needed} exceeds cap {cap}")]
    SizeCap { needed: usize, cap: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("alphabet cap exceeded at depth {achieved} of {requested}")]
    DepthCap { achieved: usize, requested: usize },
    #[error("numerical identity violated: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// SplitMix64 scrambler, used to derive independent per-path and per-trial
/// seeds so parallel runs reproduce sequential output exactly.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

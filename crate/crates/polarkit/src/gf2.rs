//! GF(2) linear algebra for polarization kernels.
//!
//! Matrices are stored as packed 64-bit words per row. Besides the generic
//! rank / inverse machinery this module carries the kernel-specific
//! decisions: unit-diagonalization by column permutation, the exact
//! polarizing test (reduce the last row until its weight exceeds one), the
//! recursive Kronecker encoder, and the erasure-recoverability span check
//! that drives the exact BEC evolution.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Explicit Kronecker powers are capped at this dimension.
pub const KRON_POWER_CAP: usize = 4096;

/// A rectangular matrix over GF(2), rows packed into 64-bit words.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    words: Vec<u64>,
}

/// A permutation of column indices; `apply` moves column `map[j]` of the
/// source into column `j` of the result.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ColumnPermutation {
    pub map: Vec<usize>,
}

impl ColumnPermutation {
    pub fn identity(n: usize) -> Self {
        Self { map: (0..n).collect() }
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &j)| i == j)
    }
}

#[derive(Serialize, Deserialize)]
struct KernelJson {
    l: usize,
    rows: Vec<String>,
}

impl BitMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "dimensions must be positive");
        let stride = cols.div_ceil(64);
        Self { rows, cols, stride, words: vec![0; rows * stride] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Parses rows of `'0'`/`'1'` characters, all the same length.
    pub fn from_rows(rows: &[&str]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        let cols = rows[0].len();
        let mut m = Self::zero(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::LengthMismatch { expected: cols, got: row.len() });
            }
            for (j, ch) in row.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => m.set(i, j, true),
                    _ => {
                        return Err(Error::InvalidArgument(format!(
                            "bad kernel character {ch:?}"
                        )))
                    }
                }
            }
        }
        Ok(m)
    }

    /// Parses either the JSON form `{"l": ℓ, "rows": [...]}` or plain text
    /// lines of 0/1 characters.
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim();
        if trimmed.starts_with('{') {
            let raw: KernelJson = serde_json::from_str(trimmed)
                .map_err(|e| Error::InvalidArgument(format!("bad kernel JSON: {e}")))?;
            let rows: Vec<&str> = raw.rows.iter().map(String::as_str).collect();
            let m = Self::from_rows(&rows)?;
            if m.rows != raw.l || m.cols != raw.l {
                return Err(Error::InvalidArgument("kernel JSON l/rows mismatch".into()));
            }
            Ok(m)
        } else {
            let rows: Vec<&str> = trimmed.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
            Self::from_rows(&rows)
        }
    }

    pub fn to_row_strings(&self) -> Vec<String> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| if self.get(i, j) { '1' } else { '0' }).collect())
            .collect()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        (self.words[i * self.stride + j / 64] >> (j % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        let w = &mut self.words[i * self.stride + j / 64];
        if v {
            *w |= 1u64 << (j % 64);
        } else {
            *w &= !(1u64 << (j % 64));
        }
    }

    fn row_words(&self, i: usize) -> &[u64] {
        &self.words[i * self.stride..(i + 1) * self.stride]
    }

    fn xor_row_into(&mut self, src: usize, dst: usize) {
        let (a, b) = (src * self.stride, dst * self.stride);
        for k in 0..self.stride {
            self.words[b + k] ^= self.words[a + k];
        }
    }

    pub fn row_weight(&self, i: usize) -> usize {
        self.row_words(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Rank over GF(2) by Gaussian elimination on a copy.
    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        let mut rank = 0;
        for col in 0..m.cols {
            let Some(pivot) = (rank..m.rows).find(|&r| m.get(r, col)) else {
                continue;
            };
            if pivot != rank {
                for k in 0..m.stride {
                    m.words.swap(pivot * m.stride + k, rank * m.stride + k);
                }
            }
            for r in 0..m.rows {
                if r != rank && m.get(r, col) {
                    m.xor_row_into(rank, r);
                }
            }
            rank += 1;
            if rank == m.rows {
                break;
            }
        }
        rank
    }

    pub fn is_invertible(&self) -> bool {
        self.rows == self.cols && self.rank() == self.rows
    }

    /// Gauss-Jordan inverse, if the matrix is invertible.
    pub fn inverse(&self) -> Option<BitMatrix> {
        if self.rows != self.cols {
            return None;
        }
        let n = self.rows;
        let mut m = self.clone();
        let mut inv = BitMatrix::identity(n);
        for col in 0..n {
            let pivot = (col..n).find(|&r| m.get(r, col))?;
            if pivot != col {
                for k in 0..m.stride {
                    m.words.swap(pivot * m.stride + k, col * m.stride + k);
                    inv.words.swap(pivot * inv.stride + k, col * inv.stride + k);
                }
            }
            for r in 0..n {
                if r != col && m.get(r, col) {
                    m.xor_row_into(col, r);
                    inv.xor_row_into(col, r);
                }
            }
        }
        Some(inv)
    }

    /// Result column `j` = source column `perm.map[j]`.
    pub fn permute_cols(&self, perm: &ColumnPermutation) -> BitMatrix {
        assert_eq!(perm.map.len(), self.cols);
        let mut out = BitMatrix::zero(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, &src) in perm.map.iter().enumerate() {
                if self.get(i, src) {
                    out.set(i, j, true);
                }
            }
        }
        out
    }

    /// Row-vector times matrix over GF(2): `u · M`.
    pub fn vec_mul(&self, u: &[u8]) -> Result<Vec<u8>> {
        if u.len() != self.rows {
            return Err(Error::LengthMismatch { expected: self.rows, got: u.len() });
        }
        let mut out = vec![0u8; self.cols];
        for (i, &bit) in u.iter().enumerate() {
            if bit & 1 == 1 {
                for (j, o) in out.iter_mut().enumerate() {
                    *o ^= self.get(i, j) as u8;
                }
            }
        }
        Ok(out)
    }

    pub fn kron(&self, other: &BitMatrix) -> BitMatrix {
        let mut out = BitMatrix::zero(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                if !self.get(i, j) {
                    continue;
                }
                for a in 0..other.rows {
                    for b in 0..other.cols {
                        if other.get(a, b) {
                            out.set(i * other.rows + a, j * other.cols + b, true);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Explicit `G^⊗n` under the convention `G^⊗n = G ⊗ G^⊗(n−1)`.
/// Test oracle for [`kron_encode`]; dimension capped at 4096.
pub fn kron_power(g: &BitMatrix, n: usize) -> Result<BitMatrix> {
    let size = g
        .rows()
        .checked_pow(n as u32)
        .filter(|&s| s <= KRON_POWER_CAP)
        .ok_or(Error::SizeCap { needed: usize::MAX, cap: KRON_POWER_CAP })?;
    let _ = size;
    let mut acc = BitMatrix::identity(1);
    for _ in 0..n {
        acc = g.kron(&acc);
    }
    Ok(acc)
}

/// `u · G^⊗n` computed recursively in `O(N log N)` kernel applications,
/// without materializing the Kronecker power.
pub fn kron_encode(g: &BitMatrix, n: usize, u: &[u8]) -> Result<Vec<u8>> {
    let kernels = vec![g.clone(); n];
    kron_encode_mixed(&kernels, u)
}

/// `u · (G_1 ⊗ G_2 ⊗ … ⊗ G_n)` for a per-level kernel sequence. The vector
/// index is read in mixed-radix digits, most significant digit first, digit
/// `t` selecting the block of level `t`.
pub fn kron_encode_mixed(kernels: &[BitMatrix], u: &[u8]) -> Result<Vec<u8>> {
    Ok(kron_encode_counted(kernels, u)?.0)
}

/// As [`kron_encode_mixed`] but also reports the number of kernel
/// applications performed, for cost-scaling checks.
pub fn kron_encode_counted(kernels: &[BitMatrix], u: &[u8]) -> Result<(Vec<u8>, u64)> {
    let expected: usize = kernels.iter().map(BitMatrix::rows).product();
    if u.len() != expected {
        return Err(Error::LengthMismatch { expected, got: u.len() });
    }
    let mut ops = 0u64;
    let out = encode_rec(kernels, u, &mut ops);
    Ok((out, ops))
}

fn encode_rec(kernels: &[BitMatrix], u: &[u8], ops: &mut u64) -> Vec<u8> {
    let Some((g, rest)) = kernels.split_first() else {
        return u.to_vec();
    };
    let l = g.rows();
    let m = u.len() / l;
    let blocks: Vec<Vec<u8>> = (0..l)
        .map(|a| encode_rec(rest, &u[a * m..(a + 1) * m], ops))
        .collect();
    let mut out = vec![0u8; u.len()];
    let mut v = vec![0u8; l];
    for d in 0..m {
        for (a, blk) in blocks.iter().enumerate() {
            v[a] = blk[d];
        }
        let w = g.vec_mul(&v).expect("length fixed");
        *ops += 1;
        for (c, &bit) in w.iter().enumerate() {
            out[c * m + d] = bit;
        }
    }
    out
}

/// Finds a column permutation `σ` with `(Gσ)_{ii} = 1` for all `i`, by
/// bipartite matching of rows to columns through the 1-entries. Existence
/// is guaranteed for invertible `G`; failure therefore signals a
/// non-invertible input. Among valid matchings the lexicographically
/// smallest `map` is returned.
pub fn unit_diagonalize(g: &BitMatrix) -> Result<ColumnPermutation> {
    if g.rows() != g.cols() {
        return Err(Error::NotInvertible);
    }
    let n = g.rows();
    let mut map = vec![0usize; n];
    let mut used = vec![false; n];
    if !assign(g, 0, &mut map, &mut used) {
        return Err(Error::NotInvertible);
    }
    Ok(ColumnPermutation { map })
}

fn assign(g: &BitMatrix, row: usize, map: &mut [usize], used: &mut [bool]) -> bool {
    if row == g.rows() {
        return true;
    }
    for col in 0..g.cols() {
        if !used[col] && g.get(row, col) {
            used[col] = true;
            map[row] = col;
            if assign(g, row + 1, map, used) {
                return true;
            }
            used[col] = false;
        }
    }
    false
}

/// The Lemma-2 reduction on a unit-diagonal matrix: repeatedly inspect the
/// last row of the residual; weight ≥ 2 stops the reduction, weight 1
/// removes the last row and column. Returns the stopping `(index, weight)`
/// (0-based channel index) or `None` if the residual empties out, i.e. the
/// matrix is column-permutable to upper triangular form.
fn reduce_last_row(m: &BitMatrix) -> Option<(usize, usize)> {
    let l = m.rows();
    for size in (1..=l).rev() {
        let row = size - 1;
        let weight = (0..size).filter(|&j| m.get(row, j)).count();
        debug_assert!(weight >= 1, "unit diagonal guarantees the diagonal 1");
        if weight >= 2 {
            return Some((row, weight));
        }
    }
    None
}

/// Whether `G^⊗n` polarizes symmetric channels: true iff no column
/// permutation makes `G` upper triangular. Invariant under column
/// permutations of `G`.
pub fn is_polarizing(g: &BitMatrix) -> Result<bool> {
    let sigma = unit_diagonalize(g)?;
    Ok(reduce_last_row(&g.permute_cols(&sigma)).is_some())
}

/// The first reduction level whose last row has weight `k ≥ 2`, as
/// `(channel index i, weight k)` with `i` 0-based against the
/// unit-diagonalized form: the synthesized channel `i` satisfies
/// `Z^(i) = Z(W)^k` and `I^(i) = I(W^k)`.
pub fn last_reduction_weight(g: &BitMatrix) -> Result<(usize, usize)> {
    let sigma = unit_diagonalize(g)?;
    reduce_last_row(&g.permute_cols(&sigma)).ok_or(Error::NotPolarizing)
}

/// Erasure recoverability of `u_i` (0-based): with `u_0..u_{i−1}` known and
/// the rest unknown, `u_i` is determined by the codeword coordinates in
/// `unerased` iff the unit functional on the first unknown lies in the
/// GF(2) span of `{ G[i.., j] : j ∈ unerased }`.
pub fn is_recoverable(g: &BitMatrix, i: usize, unerased: &[usize]) -> bool {
    let l = g.rows();
    debug_assert!(i < l && l <= 64);
    let target = 1u64; // e_1 on unknowns u_i..u_{l-1}
    let mut basis: Vec<u64> = Vec::with_capacity(l - i);
    let reduce = |mut v: u64, basis: &[u64]| {
        for &b in basis {
            let lead = 1u64 << (63 - b.leading_zeros());
            if v & lead != 0 {
                v ^= b;
            }
        }
        v
    };
    for &j in unerased {
        let mut col = 0u64;
        for t in i..l {
            if g.get(t, j) {
                col |= 1 << (t - i);
            }
        }
        let v = reduce(col, &basis);
        if v != 0 {
            basis.push(v);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    reduce(target, &basis) == 0
}

/// The canonical `2×2` polarizing kernel `[[1,0],[1,1]]`.
pub fn g2() -> BitMatrix {
    BitMatrix::from_rows(&["10", "11"]).expect("static kernel")
}

//! Structured matrix-vector products for M matrices.
//!
//! An M matrix of size `2^k x 2^k` has a zero top-left quadrant and a
//! bottom-right quadrant equal to the sum of the other two, recursively. Such
//! a matrix is fixed by its secondary diagonal `diag[a] = M[a][!a]`, and
//!
//! ```text
//! M · f = zeta(diag ⊙ zeta(g)),   g[a] = f[!a]
//! ```
//!
//! where `zeta` is the subset-sum transform `out[x] = Σ_{y ⊆ x} in[y]`. The
//! first transform is the downward pass of the recursive scheme (the
//! `v1 + v2` additions), the second the upward pass (`r1 + r2`). Each costs
//! `k · 2^(k-1)` additions.

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest `k` accepted by [`reconstruct_dense`].
pub const DENSE_MAX_K: usize = 12;

/// Receives operation counts from the kernels. `()` ignores them.
pub trait OpTally {
    fn adds(&mut self, n: u64);
    fn muls(&mut self, n: u64);
}

impl OpTally for () {
    #[inline(always)]
    fn adds(&mut self, _: u64) {}
    #[inline(always)]
    fn muls(&mut self, _: u64) {}
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OpCounts {
    pub adds: u64,
    pub muls: u64,
}

impl OpTally for OpCounts {
    #[inline(always)]
    fn adds(&mut self, n: u64) {
        self.adds += n;
    }
    #[inline(always)]
    fn muls(&mut self, n: u64) {
        self.muls += n;
    }
}

impl std::ops::AddAssign for OpCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.adds += rhs.adds;
        self.muls += rhs.muls;
    }
}

fn log2_len(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::Length(len));
    }
    Ok(len.trailing_zeros() as usize)
}

/// The secondary diagonal of an M matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalVector {
    entries: Vec<f64>,
}

impl DiagonalVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        log2_len(entries.len())?;
        Ok(Self { entries })
    }

    pub fn k(&self) -> usize {
        self.entries.len().trailing_zeros() as usize
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Elements per tile; 32 KiB of `f64`, sized for L1.
const TILE: usize = 1 << 12;

/// In-place subset-sum transform; bit positions are processed in ascending
/// order. `v.len()` must be a power of two.
///
/// Bits below the tile size run tile by tile, higher bits run on column
/// strips that fit a tile. Every element sees the same additions in the same
/// order as the plain bit-by-bit loop, so results are bit-identical to it.
#[inline]
pub fn subset_zeta_in_place<T: OpTally>(v: &mut [f64], tally: &mut T) {
    let n = v.len();
    debug_assert!(n.is_power_of_two());
    if n < 2 {
        return;
    }
    let tile = n.min(TILE);
    for block in v.chunks_exact_mut(tile) {
        zeta_low(block);
    }
    if n > tile {
        zeta_high(v, tile);
    }
    tally.adds((n.trailing_zeros() as u64) * (n as u64 / 2));
}

fn zeta_low(v: &mut [f64]) {
    let mut half = 1;
    while half < v.len() {
        for block in v.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (x, y) in hi.iter_mut().zip(lo.iter()) {
                *x += *y;
            }
        }
        half *= 2;
    }
}

/// Most bits handled per sweep in [`zeta_high`], and the row segment width.
const GROUP_BITS: u32 = 4;
const SEGMENT: usize = TILE >> GROUP_BITS;

/// Passes for the bits at and above `log2(row_len)`, viewing `v` as rows of
/// `row_len`. Up to four bits are handled per sweep: the row segments they
/// combine are copied to a tile-sized scratch block, transformed there bit
/// by bit, and copied back.
fn zeta_high(v: &mut [f64], row_len: usize) {
    let rows = v.len() / row_len;
    let mut scratch = [0.0f64; TILE];
    let w = SEGMENT.min(row_len);
    let mut half = 1;
    while half < rows {
        let g = (rows / half).trailing_zeros().min(GROUP_BITS);
        let m = 1usize << g;
        let span = half << g;
        for group in (0..rows).step_by(span) {
            for base in group..group + half {
                for col in (0..row_len).step_by(w) {
                    for i in 0..m {
                        let at = (base + i * half) * row_len + col;
                        scratch[i * w..(i + 1) * w].copy_from_slice(&v[at..at + w]);
                    }
                    let mut h = 1;
                    while h < m {
                        for i in (0..m).filter(|i| i & h != 0) {
                            let (lo, hi) = scratch.split_at_mut(i * w);
                            let src = &lo[(i ^ h) * w..(i ^ h) * w + w];
                            for (x, y) in hi[..w].iter_mut().zip(src) {
                                *x += *y;
                            }
                        }
                        h *= 2;
                    }
                    for i in 0..m {
                        let at = (base + i * half) * row_len + col;
                        v[at..at + w].copy_from_slice(&scratch[i * w..(i + 1) * w]);
                    }
                }
            }
        }
        half = span;
    }
}

pub fn subset_zeta(v: &[f64]) -> Result<Vec<f64>> {
    log2_len(v.len())?;
    let mut out = v.to_vec();
    subset_zeta_in_place(&mut out, &mut ());
    Ok(out)
}

/// `f` after the downward pass, ready to be multiplied by any number of
/// diagonals of the same size.
#[derive(Debug, Clone, Default)]
pub struct PreparedVector {
    transformed: Vec<f64>,
}

impl PreparedVector {
    pub fn new<T: OpTally>(f: &[f64], tally: &mut T) -> Result<Self> {
        log2_len(f.len())?;
        let mut transformed: Vec<f64> = f.iter().rev().copied().collect();
        subset_zeta_in_place(&mut transformed, tally);
        Ok(Self { transformed })
    }

    /// Re-prepare for a new `f`, keeping the allocation.
    pub fn prepare<T: OpTally>(&mut self, f: &[f64], tally: &mut T) -> Result<()> {
        log2_len(f.len())?;
        self.transformed.clear();
        self.transformed.extend(f.iter().rev());
        subset_zeta_in_place(&mut self.transformed, tally);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.transformed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transformed.is_empty()
    }

    /// Scale the prepared vector; `(c·M)·f = M·(c·f)`.
    pub fn scale<T: OpTally>(&mut self, c: f64, tally: &mut T) {
        for x in &mut self.transformed {
            *x *= c;
        }
        tally.muls(self.transformed.len() as u64);
    }

    /// Write `M · f` into `out`, where `M` is given by its diagonal.
    pub fn multiply_into<T: OpTally>(
        &self,
        diag: &[f64],
        out: &mut [f64],
        tally: &mut T,
    ) -> Result<()> {
        if diag.len() != self.transformed.len() || out.len() != diag.len() {
            return Err(Error::Length(diag.len()));
        }
        let n = out.len();
        let tile = n.min(TILE);
        // The product is formed tile by tile and transformed while still hot.
        for ((o, d), t) in out
            .chunks_exact_mut(tile)
            .zip(diag.chunks_exact(tile))
            .zip(self.transformed.chunks_exact(tile))
        {
            for ((o, &d), &t) in o.iter_mut().zip(d).zip(t) {
                *o = d * t;
            }
            zeta_low(o);
        }
        if n > tile {
            zeta_high(out, tile);
        }
        tally.muls(n as u64);
        tally.adds((n.trailing_zeros() as u64) * (n as u64 / 2));
        Ok(())
    }
}

/// `M · f` for the M matrix with secondary diagonal `diag`, in
/// `k · 2^k` additions and `2^k` multiplications.
pub fn strassen_like_mult(diag: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    strassen_like_mult_counted(diag, f, &mut ())
}

pub fn strassen_like_mult_counted<T: OpTally>(
    diag: &[f64],
    f: &[f64],
    tally: &mut T,
) -> Result<Vec<f64>> {
    if diag.len() != f.len() {
        return Err(Error::Length(f.len()));
    }
    let prepared = PreparedVector::new(f, tally)?;
    let mut out = vec![0.0; diag.len()];
    prepared.multiply_into(diag, &mut out, tally)?;
    Ok(out)
}

/// Square row-major matrix used by the reference paths.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.n + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n..(row + 1) * self.n]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `M[a][!a]` for every row `a`.
    pub fn secondary_diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|a| self.get(a, self.n - 1 - a)).collect()
    }
}

/// Rebuild the full matrix from its secondary diagonal.
pub fn reconstruct_dense(diag: &DiagonalVector) -> Result<DenseMatrix> {
    let k = diag.k();
    if k > DENSE_MAX_K {
        return Err(Error::Size(diag.entries.len()));
    }
    let n = 1 << k;
    let mut m = DenseMatrix::zeros(n);
    fill_quadrants(&mut m, 0, 0, diag.entries());
    Ok(m)
}

fn fill_quadrants(m: &mut DenseMatrix, r0: usize, c0: usize, diag: &[f64]) {
    let size = diag.len();
    if size == 1 {
        m.set(r0, c0, diag[0]);
        return;
    }
    let h = size / 2;
    // top-right: rows with a clear leading bit own diag[..h]
    fill_quadrants(m, r0, c0 + h, &diag[..h]);
    fill_quadrants(m, r0 + h, c0, &diag[h..]);
    for i in 0..h {
        for j in 0..h {
            let v = m.get(r0 + i, c0 + h + j) + m.get(r0 + h + i, c0 + j);
            m.set(r0 + h + i, c0 + h + j, v);
        }
    }
}

/// Recursive two-multiplication scheme on a dense matrix. Debug builds verify
/// the quadrant identities at each visited level.
pub fn mv_recursive(m: &DenseMatrix, v: &[f64]) -> Result<Vec<f64>> {
    log2_len(m.size())?;
    if v.len() != m.size() {
        return Err(Error::Length(v.len()));
    }
    let mut out = vec![0.0; v.len()];
    mv_block(m, 0, 0, v, &mut out)?;
    Ok(out)
}

fn mv_block(m: &DenseMatrix, r0: usize, c0: usize, v: &[f64], out: &mut [f64]) -> Result<()> {
    let size = v.len();
    if size == 1 {
        out[0] = m.get(r0, c0) * v[0];
        return Ok(());
    }
    let h = size / 2;
    #[cfg(debug_assertions)]
    check_quadrants(m, r0, c0, h)?;

    let (v1, v2) = v.split_at(h);
    let (top, bottom) = out.split_at_mut(h);
    mv_block(m, r0, c0 + h, v2, top)?;
    let sum: Vec<f64> = v1.iter().zip(v2).map(|(a, b)| a + b).collect();
    mv_block(m, r0 + h, c0, &sum, bottom)?;
    for (b, t) in bottom.iter_mut().zip(top.iter()) {
        *b += *t;
    }
    Ok(())
}

#[cfg(debug_assertions)]
fn check_quadrants(m: &DenseMatrix, r0: usize, c0: usize, h: usize) -> Result<()> {
    const TOL: f64 = 1e-9;
    for i in 0..h {
        for j in 0..h {
            let m1 = m.get(r0 + i, c0 + j);
            let m2 = m.get(r0 + i, c0 + h + j);
            let m3 = m.get(r0 + h + i, c0 + j);
            let m4 = m.get(r0 + h + i, c0 + h + j);
            if m1.abs() > TOL {
                return Err(Error::Structure(format!(
                    "nonzero {m1} in the zero quadrant at ({}, {})",
                    r0 + i,
                    c0 + j
                )));
            }
            if (m4 - m2 - m3).abs() > TOL * (1.0 + m4.abs()) {
                return Err(Error::Structure(format!(
                    "M4 != M2 + M3 at ({}, {})",
                    r0 + h + i,
                    c0 + h + j
                )));
            }
        }
    }
    Ok(())
}

//! Sparse third-order binary tensors and the multilinear kernels built on
//! them.
//!
//! A tensor holds engagement structure as coordinate triples `(post, follower,
//! engaging user)`; every stored entry has value 1. Mode numbers are 1-based
//! (`1` = posts, `2` and `3` = the two user modes). Unfolding follows the
//! smaller-remaining-mode-varies-fastest convention, under which the three
//! matricized factorization identities hold with Khatri-Rao products
//! `(C kr B)`, `(C kr A)`, `(B kr A)` for modes 1, 2, 3 respectively.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Coordinate-format binary third-order tensor, `posts x users x users`.
///
/// Entries are strictly sorted lexicographic triples without duplicates; an
/// absent coordinate is 0, a present one is 1. Both user modes index the same
/// user set, so the shape is `(p, u, u)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseTensor3 {
    post_count: usize,
    user_count: usize,
    entries: Vec<(usize, usize, usize)>,
}

impl SparseTensor3 {
    /// Builds a tensor from arbitrary-order triples; sorts, deduplicates, and
    /// range-checks them.
    pub fn new(
        post_count: usize,
        user_count: usize,
        mut entries: Vec<(usize, usize, usize)>,
    ) -> Result<Self> {
        for &(i, j, k) in &entries {
            if i >= post_count || j >= user_count || k >= user_count {
                return Err(Error::invalid(format!(
                    "entry ({i},{j},{k}) out of range for {post_count}x{user_count}x{user_count}"
                )));
            }
        }
        entries.sort_unstable();
        entries.dedup();
        Ok(Self {
            post_count,
            user_count,
            entries,
        })
    }

    /// Shape `(p, u, u)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.post_count, self.user_count, self.user_count)
    }

    pub fn post_count(&self) -> usize {
        self.post_count
    }

    pub fn user_count(&self) -> usize {
        self.user_count
    }

    /// Sorted, deduplicated coordinate triples.
    pub fn entries(&self) -> &[(usize, usize, usize)] {
        &self.entries
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    /// Squared Frobenius norm; equals the entry count for a binary tensor.
    pub fn norm_sq(&self) -> f64 {
        self.entries.len() as f64
    }
}

/// Sparse binary matrix produced by unfolding; entries sorted, all value 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize)>,
}

impl SparseMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    /// Multiplies this sparse 0/1 matrix by a dense matrix.
    pub fn matmul_dense(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if rhs.rows() != self.cols {
            return Err(Error::invalid(format!(
                "sparse-dense shape mismatch: {}x{} times {}x{}",
                self.rows,
                self.cols,
                rhs.rows(),
                rhs.cols()
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols());
        for &(r, c) in &self.entries {
            let src = rhs.row(c);
            let dst = out.row_mut(r);
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        Ok(out)
    }
}

/// Per-mode dimensions with the target mode first, then the remaining modes
/// in increasing mode order.
fn mode_split(t: &SparseTensor3, mode: usize) -> Result<(usize, usize, usize)> {
    let (d1, d2, d3) = t.dims();
    match mode {
        1 => Ok((d1, d2, d3)),
        2 => Ok((d2, d1, d3)),
        3 => Ok((d3, d1, d2)),
        other => Err(Error::invalid(format!(
            "mode must be 1, 2, or 3, got {other}"
        ))),
    }
}

/// Reorders an entry as (target-mode index, first remaining, second
/// remaining) with remaining modes in increasing mode order.
#[inline]
fn mode_indices(entry: (usize, usize, usize), mode: usize) -> (usize, usize, usize) {
    let (i, j, k) = entry;
    match mode {
        1 => (i, j, k),
        2 => (j, i, k),
        _ => (k, i, j),
    }
}

/// Mode-`n` unfolding. The remaining modes are flattened with the smaller
/// mode index varying fastest: column = `i_a + i_b * dim_a`.
pub fn matricize(t: &SparseTensor3, mode: usize) -> Result<SparseMatrix> {
    let (target, dim_a, dim_b) = mode_split(t, mode)?;
    let mut entries: Vec<(usize, usize)> = t
        .entries()
        .iter()
        .map(|&e| {
            let (row, ia, ib) = mode_indices(e, mode);
            (row, ia + ib * dim_a)
        })
        .collect();
    entries.sort_unstable();
    Ok(SparseMatrix {
        rows: target,
        cols: dim_a * dim_b,
        entries,
    })
}

/// Matricized-tensor times Khatri-Rao product for the target mode, computed
/// directly from the sparse entries.
///
/// `x` and `y` are the factors of the two non-target modes in increasing mode
/// order; the result equals `matricize(t, mode) * khatri_rao(y, x)` without
/// materializing either operand.
pub fn mttkrp(
    t: &SparseTensor3,
    x: &DenseMatrix,
    y: &DenseMatrix,
    mode: usize,
) -> Result<DenseMatrix> {
    let (target, dim_a, dim_b) = mode_split(t, mode)?;
    if x.cols() != y.cols() {
        return Err(Error::invalid(format!(
            "mttkrp factor rank mismatch: {} vs {}",
            x.cols(),
            y.cols()
        )));
    }
    if x.rows() != dim_a || y.rows() != dim_b {
        return Err(Error::invalid(format!(
            "mttkrp factor shape mismatch for mode {mode}: got {}x{} and {}x{}, need row counts {dim_a} and {dim_b}",
            x.rows(),
            x.cols(),
            y.rows(),
            y.cols()
        )));
    }
    let rank = x.cols();
    let mut out = DenseMatrix::zeros(target, rank);
    for &entry in t.entries() {
        let (row, ia, ib) = mode_indices(entry, mode);
        let xa = x.row(ia);
        let yb = y.row(ib);
        let dst = out.row_mut(row);
        for r in 0..rank {
            dst[r] += xa[r] * yb[r];
        }
    }
    Ok(out)
}

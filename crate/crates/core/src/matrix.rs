//! Dense row-major matrices and the shared Gram-system solver.
//!
//! `DenseMatrix` carries every dense block in the crate: factor matrices,
//! regression coefficients, one-hot labels, and the small `r x r` Gram
//! systems the alternating updates reduce to. Values are `f64` and must stay
//! finite; constructors and solver outputs enforce this.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of finite `f64` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds from row-major data; length must be `rows * cols` and every
    /// value finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite matrix entry {bad}")));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds by evaluating `f(row, col)` over the shape.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[row * self.cols + col] = value;
    }

    /// Borrow one row as a slice.
    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::invalid(format!(
                "matmul shape mismatch: {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// Gram matrix `selfᵀ · self` (symmetric `cols x cols`).
    pub fn gram(&self) -> Self {
        let r = self.cols;
        let mut out = Self::zeros(r, r);
        for row in 0..self.rows {
            let v = self.row(row);
            for a in 0..r {
                for b in a..r {
                    out.data[a * r + b] += v[a] * v[b];
                }
            }
        }
        for a in 0..r {
            for b in 0..a {
                out.data[a * r + b] = out.data[b * r + a];
            }
        }
        out
    }

    /// Elementwise product; shapes must match.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::invalid(format!(
                "hadamard shape mismatch: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Largest absolute entry difference against a same-shape matrix.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn ensure_finite(&self) -> Result<()> {
        if let Some(bad) = self.data.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite matrix entry {bad}")));
        }
        Ok(())
    }
}

/// Khatri-Rao product: column `r` of the result is the Kronecker product of
/// column `r` of `x` with column `r` of `y`, so an `IxR` and a `JxR` input
/// yield `(I*J)xR` with entry `[i*J + j, r] = x[i,r] * y[j,r]`.
pub fn khatri_rao(x: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix> {
    if x.cols() != y.cols() {
        return Err(Error::invalid(format!(
            "khatri-rao column mismatch: {} vs {}",
            x.cols(),
            y.cols()
        )));
    }
    let r = x.cols();
    let mut out = DenseMatrix::zeros(x.rows() * y.rows(), r);
    for i in 0..x.rows() {
        let xi = x.row(i);
        for j in 0..y.rows() {
            let yj = y.row(j);
            let row = out.row_mut(i * y.rows() + j);
            for c in 0..r {
                row[c] = xi[c] * yj[c];
            }
        }
    }
    Ok(out)
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factors `m`; fails with the smallest diagonal pivot seen when the
    /// matrix is numerically indefinite.
    fn factor(m: &DenseMatrix) -> Result<Self> {
        let n = m.rows();
        let mut lower = vec![0.0; n * n];
        let mut smallest_pivot = f64::INFINITY;
        for j in 0..n {
            let mut d = m.get(j, j);
            for k in 0..j {
                d -= lower[j * n + k] * lower[j * n + k];
            }
            smallest_pivot = smallest_pivot.min(d);
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::Singular {
                    pivot: smallest_pivot,
                    block: None,
                });
            }
            let dj = d.sqrt();
            lower[j * n + j] = dj;
            for i in (j + 1)..n {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= lower[i * n + k] * lower[j * n + k];
                }
                lower[i * n + j] = s / dj;
            }
        }
        Ok(Self { n, lower })
    }

    /// Solves `M x = b` by forward then backward substitution.
    fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.lower[i * n + k] * x[k];
            }
            x[i] = s / self.lower[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.lower[k * n + i] * x[k];
            }
            x[i] = s / self.lower[i * n + i];
        }
    }
}

/// Relative symmetry tolerance accepted by [`gram_solve`].
const SYMMETRY_TOL: f64 = 1e-10;

/// Solves `X (G + ridge*I) = RHS` row-wise for `X`, given a symmetric `G`.
///
/// `G + ridge*I` is factored once (SPD Cholesky) and each row of `RHS` is
/// solved independently, with one iterative-refinement pass to keep residuals
/// small on ill-conditioned systems. Fails with a singularity error naming
/// the smallest pivot when the factorization breaks down.
pub fn gram_solve(g: &DenseMatrix, rhs: &DenseMatrix, ridge: f64) -> Result<DenseMatrix> {
    let system = ridged_system(g, ridge)?;
    if rhs.cols() != system.rows() {
        return Err(Error::invalid(format!(
            "gram_solve rhs has {} columns, system is {}x{}",
            rhs.cols(),
            system.rows(),
            system.rows()
        )));
    }
    let chol = Cholesky::factor(&system)?;
    let mut out = DenseMatrix::zeros(rhs.rows(), rhs.cols());
    for i in 0..rhs.rows() {
        solve_row_refined(&chol, &system, rhs.row(i), out.row_mut(i));
    }
    out.ensure_finite()?;
    Ok(out)
}

/// Validates and assembles `G + ridge*I`.
fn ridged_system(g: &DenseMatrix, ridge: f64) -> Result<DenseMatrix> {
    if g.rows() != g.cols() {
        return Err(Error::invalid(format!(
            "gram matrix must be square, got {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    if ridge.is_nan() || ridge < 0.0 {
        return Err(Error::invalid(format!("ridge must be >= 0, got {ridge}")));
    }
    let scale = g.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..g.rows() {
        for j in (i + 1)..g.cols() {
            if (g.get(i, j) - g.get(j, i)).abs() > SYMMETRY_TOL * scale.max(1.0) {
                return Err(Error::invalid(format!(
                    "gram matrix is not symmetric at ({i},{j}): {} vs {}",
                    g.get(i, j),
                    g.get(j, i)
                )));
            }
        }
    }
    let mut system = g.clone();
    for i in 0..system.rows() {
        let v = system.get(i, i) + ridge;
        system.set(i, i, v);
    }
    Ok(system)
}

/// One Cholesky solve plus a single refinement step on the residual.
fn solve_row_refined(chol: &Cholesky, system: &DenseMatrix, b: &[f64], x: &mut [f64]) {
    chol.solve_into(b, x);
    let n = b.len();
    let mut residual = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..n {
            s -= system.get(i, k) * x[k];
        }
        residual[i] = s;
    }
    let mut correction = vec![0.0; n];
    chol.solve_into(&residual, &mut correction);
    for i in 0..n {
        x[i] += correction[i];
    }
}

/// Solves `(G + ridge*I) X = RHS` for `X` (column-unknown orientation).
///
/// Used for the coefficient update, where the unknown sits on the left of
/// the regressors. Equivalent to `gram_solve` on transposed right-hand side.
pub fn gram_solve_left(g: &DenseMatrix, rhs: &DenseMatrix, ridge: f64) -> Result<DenseMatrix> {
    let flipped = gram_solve(g, &rhs.transpose(), ridge)?;
    Ok(flipped.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_bad_length_and_nan() {
        assert!(DenseMatrix::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn khatri_rao_identity_and_two_columns() {
        let x = DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        let y = DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        assert_eq!(khatri_rao(&x, &y).unwrap().values(), &[1.0]);

        let x = DenseMatrix::from_vec(2, 1, vec![2.0, 3.0]).unwrap();
        let y = DenseMatrix::from_vec(2, 1, vec![5.0, 7.0]).unwrap();
        let kr = khatri_rao(&x, &y).unwrap();
        assert_eq!(kr.rows(), 4);
        assert_eq!(kr.values(), &[10.0, 14.0, 15.0, 21.0]);
    }

    #[test]
    fn khatri_rao_rejects_column_mismatch() {
        let x = DenseMatrix::zeros(2, 2);
        let y = DenseMatrix::zeros(2, 3);
        assert!(matches!(khatri_rao(&x, &y), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn gram_solve_identity_returns_rhs() {
        let g = DenseMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.0 });
        let rhs = DenseMatrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let x = gram_solve(&g, &rhs, 0.0).unwrap();
        assert!(x.max_abs_diff(&rhs) < 1e-14);
    }

    #[test]
    fn gram_solve_diagonal_scaling() {
        let g = DenseMatrix::from_fn(2, 2, |i, j| if i == j { 2.0 } else { 0.0 });
        let rhs = DenseMatrix::from_vec(1, 2, vec![2.0, 4.0]).unwrap();
        let x = gram_solve(&g, &rhs, 0.0).unwrap();
        assert_eq!(x.values(), &[1.0, 2.0]);
    }

    #[test]
    fn gram_solve_reports_singularity_pivot() {
        let g = DenseMatrix::zeros(2, 2);
        match gram_solve(&g, &DenseMatrix::zeros(1, 2), 0.0) {
            Err(Error::Singular { pivot, block: None }) => assert_eq!(pivot, 0.0),
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn gram_solve_rejects_asymmetric_input() {
        let g = DenseMatrix::from_vec(2, 2, vec![1.0, 0.5, 0.0, 1.0]).unwrap();
        assert!(matches!(
            gram_solve(&g, &DenseMatrix::zeros(1, 2), 0.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn gram_solve_left_matches_transposed_right_solve() {
        let g = DenseMatrix::from_vec(2, 2, vec![4.0, 1.0, 1.0, 3.0]).unwrap();
        let rhs = DenseMatrix::from_vec(2, 3, vec![1.0, 0.0, 2.0, 0.5, 1.0, -1.0]).unwrap();
        let x = gram_solve_left(&g, &rhs, 0.0).unwrap();
        // (G)X = RHS  =>  residual small
        let back = g.matmul(&x).unwrap();
        assert!(back.max_abs_diff(&rhs) < 1e-12);
    }
}

//! Dense symmetric positive-definite matrices with a cached Cholesky factor.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Absolute tolerance on `|a_ij - a_ji|` accepted as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A symmetric positive-definite matrix together with its lower Cholesky
/// factor and log-determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    mat: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_det: f64,
}

impl SpdMatrix {
    /// Wraps `mat`, checking symmetry and positive definiteness; the
    /// log-determinant comes from the Cholesky diagonal.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        let chol = checked_cholesky(&mat)?;
        let log_det = 2.0 * chol.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self { mat, chol, log_det })
    }

    /// Like [`SpdMatrix::new`] but with a log-determinant known in closed form.
    pub(crate) fn with_log_det(mat: DMatrix<f64>, log_det: f64) -> Result<Self> {
        let chol = checked_cholesky(&mat)?;
        Ok(Self { mat, chol, log_det })
    }

    /// Symmetrizes `mat` as `(A + A^T)/2` before wrapping. Used for products
    /// that are symmetric in exact arithmetic.
    pub fn from_symmetrized(mat: DMatrix<f64>) -> Result<Self> {
        let sym = (&mat + mat.transpose()) * 0.5;
        Self::new(sym)
    }

    pub fn from_row_slice(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch(dim * dim, data.len()));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, data))
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim)).expect("identity is SPD")
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let n = values.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 }))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// Lower-triangular `L` with `A = L L^T`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat[(i, j)]
    }

    /// Solves `A X = B`.
    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let y = self
            .chol
            .solve_lower_triangular(rhs)
            .expect("Cholesky factor has a positive diagonal");
        self.chol
            .tr_solve_lower_triangular(&y)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// Solves `L X = B` with the Cholesky factor.
    pub fn solve_lower(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol
            .solve_lower_triangular(rhs)
            .expect("Cholesky factor has a positive diagonal")
    }

    pub fn inverse(&self) -> SpdMatrix {
        let n = self.dim();
        let inv = self.solve(&DMatrix::identity(n, n));
        let inv = (&inv + inv.transpose()) * 0.5;
        SpdMatrix::with_log_det(inv, -self.log_det).expect("inverse of an SPD matrix is SPD")
    }

    /// `tr(A^{-1} B)`.
    pub fn trace_solve(&self, other: &DMatrix<f64>) -> f64 {
        self.solve(other).trace()
    }

    /// Principal submatrix on 0-based `rows`.
    pub fn principal_submatrix(&self, rows: &[usize]) -> Result<SpdMatrix> {
        if rows.is_empty() {
            return Err(Error::EmptySubset);
        }
        let n = self.dim();
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::NodeNotFound(bad + 1));
        }
        let k = rows.len();
        SpdMatrix::new(DMatrix::from_fn(k, k, |a, b| self.mat[(rows[a], rows[b])]))
    }

    /// `M A M^T` for an arbitrary (possibly rectangular) `M`; fails if the
    /// result is singular.
    pub fn congruence(&self, m: &DMatrix<f64>) -> Result<SpdMatrix> {
        if m.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(m.ncols(), self.dim()));
        }
        SpdMatrix::from_symmetrized(m * &self.mat * m.transpose())
    }
}

fn checked_cholesky(mat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !mat.is_square() || mat.nrows() == 0 {
        return Err(Error::NotSpd);
    }
    let n = mat.nrows();
    for i in 0..n {
        for j in 0..i {
            if (mat[(i, j)] - mat[(j, i)]).abs() > SYMMETRY_TOL {
                return Err(Error::NotSpd);
            }
        }
    }
    if mat.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotSpd);
    }
    let chol = nalgebra::Cholesky::new(mat.clone()).ok_or(Error::NotSpd)?;
    let l = chol.l();
    if l.diagonal().iter().any(|&d| d <= 0.0 || !d.is_finite()) {
        return Err(Error::NotSpd);
    }
    Ok(l)
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 1.0]);
        assert_eq!(SpdMatrix::new(asym), Err(Error::NotSpd));
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(SpdMatrix::new(indef), Err(Error::NotSpd));
    }

    #[test]
    fn log_det_and_inverse() {
        let a = SpdMatrix::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        assert!((a.log_det() - 1.75f64.ln()).abs() < 1e-14);
        let prod = a.matrix() * a.inverse().matrix();
        assert!(max_abs_diff(&prod, &DMatrix::identity(2, 2)) < 1e-14);
    }

    #[test]
    fn submatrix_bounds() {
        let a = SpdMatrix::identity(3);
        assert_eq!(a.principal_submatrix(&[]), Err(Error::EmptySubset));
        assert_eq!(a.principal_submatrix(&[3]), Err(Error::NodeNotFound(4)));
        assert_eq!(a.principal_submatrix(&[0, 2]).unwrap().dim(), 2);
    }
}

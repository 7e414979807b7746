use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Ordinary least squares through a Householder QR.
///
/// `design` is row-major with `cols` columns. Returns the coefficients and the
/// residual sum of squares, or [`Error::RankDeficient`] when a diagonal entry
/// of `R` collapses relative to the largest one.
pub(crate) fn least_squares(design: &[f64], cols: usize, y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let rows = y.len();
    if rows < cols {
        return Err(Error::RankDeficient);
    }
    let x = DMatrix::from_row_slice(rows, cols, design);
    let qr = x.clone().qr();
    let r = qr.r();
    let max_diag = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if max_diag == 0.0 || (0..cols).any(|i| r[(i, i)].abs() <= 1e-10 * max_diag) {
        return Err(Error::RankDeficient);
    }
    let qty = qr.q().transpose() * DVector::from_column_slice(y);
    let beta = r.solve_upper_triangular(&qty).ok_or(Error::RankDeficient)?;
    let resid = DVector::from_column_slice(y) - &x * &beta;
    Ok((beta.iter().copied().collect(), resid.norm_squared()))
}

/// Solves `a x = b` for symmetric positive-definite `a` (row-major, `n x n`).
pub(crate) fn solve_spd(a: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let m = DMatrix::from_row_slice(n, n, a);
    let chol = m.cholesky()?;
    let x = chol.solve(&DVector::from_column_slice(b));
    Some(x.iter().copied().collect())
}

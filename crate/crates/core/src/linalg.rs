//! Small dense linear-algebra helpers shared by the metric code.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest condition number accepted by [`solve_spd`].
pub const MAX_CONDITION: f64 = 1e13;

/// Extreme eigenvalues of a symmetric matrix, `(min, max)`.
pub fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = m.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Inverse of a symmetric positive definite matrix together with its
/// 2-norm condition number.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let (min, max) = eigen_range(m);
    if !(min > 0.0) || !min.is_finite() {
        return Err(Error::MetricDegenerate {
            min_eigenvalue: min,
        });
    }
    let chol = m.clone().cholesky().ok_or(Error::MetricDegenerate {
        min_eigenvalue: min,
    })?;
    Ok((chol.inverse(), max / min))
}

/// Solve `m x = rhs` for symmetric positive definite `m`, rejecting systems
/// whose condition number exceeds [`MAX_CONDITION`].
pub fn solve_spd(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let (min, max) = eigen_range(m);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Conditioning { condition });
    }
    let chol = m
        .clone()
        .cholesky()
        .ok_or(Error::Conditioning { condition })?;
    Ok(chol.solve(rhs))
}

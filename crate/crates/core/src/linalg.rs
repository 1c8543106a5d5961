//! Small dense helpers shared by the projections, solver and bounds.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{QapError, Result};

/// Eigen-decomposition of a symmetric matrix, eigenvalues unsorted.
pub fn sym_eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(QapError::Numerical("non-finite entry in eigensolver input".into()));
    }
    let dim = m.nrows();
    SymmetricEigen::try_new(m, f64::EPSILON, 1000 * dim.max(1))
        .ok_or_else(|| QapError::Numerical(format!("eigensolver did not converge (order {dim})")))
}

pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(QapError::Numerical("non-finite entry in eigensolver input".into()));
    }
    Ok(m.symmetric_eigenvalues())
}

pub fn lambda_max(m: &DMatrix<f64>) -> Result<f64> {
    Ok(sym_eigenvalues(m)?.max())
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `V W V^T`.
pub fn congruence(v: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = v * (w * v.transpose());
    symmetrize(&mut out);
    out
}

/// `V^T W V`.
pub fn compress(v: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = v.transpose() * (w * v);
    symmetrize(&mut out);
    out
}

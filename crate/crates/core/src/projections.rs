//! Euclidean projections used by the splitting iteration.
//!
//! * [`project_simplex`]: onto `{w >= 0, sum w = s}`.
//! * [`project_r`]: onto `{R ⪰ 0, trace R = s}`, via the simplex projection
//!   of the eigenvalues.
//! * [`project_y`]: the closed form of the Y-subproblem over the polyhedral
//!   set `{G_J(Y) = E00, 0 <= Y <= 1}`.
//! * [`project_z0`], [`project_za`]: the dual-side restrictions that zero
//!   (resp. pin to `-L`) the diagonal and first row/column.

use nalgebra::DMatrix;

use crate::error::{QapError, Result};
use crate::lifting::{check_square, EntryKind, GangsterIndexSet};
use crate::linalg::{sym_eigen, symmetrize};

/// Eigenvalues in `[-EIG_CLIP, 0]` are treated as exact zeros.
pub const EIG_CLIP: f64 = 1e-12;

/// Projection onto the scaled simplex `{w >= 0, sum w = s}` by the
/// sort-and-threshold method.
///
/// # Panics
///
/// If `s <= 0`.
pub fn project_simplex(v: &[f64], s: f64) -> Vec<f64> {
    assert!(s > 0.0, "simplex sum must be positive, got {s}");
    if v.is_empty() {
        return Vec::new();
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - s) / (k + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Nearest matrix to `w` in `{R ⪰ 0, trace R = s}`.
pub fn project_r(w: &DMatrix<f64>, s: f64) -> Result<DMatrix<f64>> {
    if w.nrows() != w.ncols() {
        return Err(QapError::DimensionMismatch {
            expected: w.nrows(),
            found: w.ncols(),
        });
    }
    let eig = sym_eigen(w.clone())?;
    let lam: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| if (-EIG_CLIP..=0.0).contains(&l) { 0.0 } else { l })
        .collect();
    let proj = project_simplex(&lam, s);
    Ok(reassemble(&eig.eigenvectors, &proj))
}

/// `U diag(d) U^T` over the columns with `d > 0`; `d` must be nonnegative.
pub(crate) fn reassemble(u: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    let keep: Vec<usize> = (0..d.len()).filter(|&i| d[i] > 0.0).collect();
    let m = u.nrows();
    let mut scaled = DMatrix::zeros(m, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        scaled.set_column(c, &(u.column(i) * d[i].sqrt()));
    }
    let mut out = &scaled * scaled.transpose();
    symmetrize(&mut out);
    out
}

/// Closed-form Y-update: corner to one, gangster entries to zero, the
/// diagonal and first row/column to `clamp(vrv, 0, 1)`, everything else to
/// `clamp(t, 0, 1)`.
pub fn project_y(
    t: &DMatrix<f64>,
    vrv: &DMatrix<f64>,
    j: &GangsterIndexSet,
) -> Result<DMatrix<f64>> {
    let dim = j.dim();
    check_square(t, dim)?;
    check_square(vrv, dim)?;
    let mut out = DMatrix::from_fn(dim, dim, |r, c| match j.kind(r, c) {
        EntryKind::Corner => 1.0,
        EntryKind::Gangster => 0.0,
        EntryKind::Arrow => vrv[(r, c)].clamp(0.0, 1.0),
        EntryKind::Free => t[(r, c)].clamp(0.0, 1.0),
    });
    symmetrize(&mut out);
    Ok(out)
}

/// Plain projection onto `{G_J(Y) = E00, 0 <= Y <= 1}`.
pub fn project_onto_y(t: &DMatrix<f64>, j: &GangsterIndexSet) -> Result<DMatrix<f64>> {
    project_y(t, t, j)
}

/// Zeroes the diagonal and the first row and column.
pub fn project_z0(z: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = z.clone();
    out.row_mut(0).fill(0.0);
    out.column_mut(0).fill(0.0);
    out.fill_diagonal(0.0);
    out
}

/// Pins `Z_ii = -L_ii` and `Z_0i = Z_i0 = -L_0i` for `i >= 1`; the corner
/// and all other entries are kept.
pub fn project_za(z: &DMatrix<f64>, l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(z, l.nrows())?;
    check_square(l, z.nrows())?;
    let mut out = z.clone();
    for i in 1..z.nrows() {
        out[(i, i)] = -l[(i, i)];
        out[(0, i)] = -l[(0, i)];
        out[(i, 0)] = -l[(i, 0)];
    }
    Ok(out)
}

/// True if `z` already satisfies the pinned entries of [`project_za`].
pub fn in_za(z: &DMatrix<f64>, l: &DMatrix<f64>, tol: f64) -> bool {
    (1..z.nrows()).all(|i| {
        (z[(i, i)] + l[(i, i)]).abs() <= tol
            && (z[(0, i)] + l[(0, i)]).abs() <= tol
            && (z[(i, 0)] + l[(i, 0)]).abs() <= tol
    })
}

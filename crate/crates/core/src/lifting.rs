//! Objects living in the lifted space `S^{n^2+1}`.
//!
//! Rows and columns of a lifted matrix are indexed `0..=n^2`. Index 0 is the
//! homogenizing coordinate; entry `X[i, j]` of an `n x n` matrix maps to
//! `1 + j*n + i` (column-major `vec`). The trailing `n^2 x n^2` block splits
//! into `n x n` blocks, block `(j, l)` holding `X[:, j] X[:, l]^T`.

use nalgebra::{DMatrix, DVector};

use crate::error::{QapError, Result};
use crate::instance::{Permutation, QapInstance};

/// Lifted index of `X[row, col]`.
#[inline]
pub fn lifted_index(n: usize, row: usize, col: usize) -> usize {
    1 + col * n + row
}

/// `L_Q` together with the shifted and normalized copy `L3` the solver uses.
///
/// On the feasible set (trace `n+1`, range inside `V̂`) the two objectives
/// are related by `<L3, Y> = (n^2/alpha) (<L_Q, Y> + sigma_l (n+1))`.
#[derive(Clone, Debug)]
pub struct LiftedObjective {
    pub n: usize,
    pub lq: DMatrix<f64>,
    pub l3: DMatrix<f64>,
    pub sigma_l: f64,
    pub alpha: f64,
}

impl LiftedObjective {
    /// Maps a value of `<L3, Y>` over the feasible set back to `<L_Q, Y>`.
    pub fn unscale_value(&self, v3: f64) -> f64 {
        let n = self.n as f64;
        (self.alpha / (n * n)) * v3 - self.sigma_l * (n + 1.0)
    }

    pub fn scale_value(&self, v: f64) -> f64 {
        let n = self.n as f64;
        (n * n / self.alpha) * (v + self.sigma_l * (n + 1.0))
    }

    pub fn dim(&self) -> usize {
        self.lq.nrows()
    }
}

/// `[0, -vec(C)^T; -vec(C), B ⊗ A]`. The returned objective is unscaled:
/// `l3 == lq`, `sigma_l = 0`, `alpha = n^2`, so `unscale_value` is the identity.
pub fn build_lq(inst: &QapInstance) -> LiftedObjective {
    let n = inst.n();
    let dim = n * n + 1;
    let kron = inst.b().kronecker(inst.a());
    let mut lq = DMatrix::zeros(dim, dim);
    lq.view_mut((1, 1), (n * n, n * n)).copy_from(&kron);
    let c = inst.c();
    for col in 0..n {
        for row in 0..n {
            let k = lifted_index(n, row, col);
            lq[(0, k)] = -c[(row, col)];
            lq[(k, 0)] = -c[(row, col)];
        }
    }
    LiftedObjective {
        n,
        l3: lq.clone(),
        lq,
        sigma_l: 0.0,
        alpha: (n * n) as f64,
    }
}

/// `L1 = P_V L_Q P_V`, `L2 = L1 + sigma_l I`, `L3 = (n^2/alpha) L2` with
/// `sigma_l = max(0, -floor(lambda_min(L_Q))) + 10n` and `alpha = ceil(||L2||_F)`.
pub fn scale_lq(lq: &LiftedObjective, basis: &FacialBasis) -> Result<LiftedObjective> {
    let n = lq.n;
    if basis.n != n {
        return Err(QapError::DimensionMismatch {
            expected: n,
            found: basis.n,
        });
    }
    let eigs = lq.lq.clone().symmetric_eigenvalues();
    let lambda_min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    if !lambda_min.is_finite() {
        return Err(QapError::Numerical("eigenvalues of L_Q are not finite".into()));
    }
    let sigma_l = f64::max(0.0, -lambda_min.floor()) + 10.0 * n as f64;

    let v = &basis.vhat;
    let inner = v.transpose() * &lq.lq * v;
    let mut l2 = v * inner * v.transpose();
    l2 = (&l2 + l2.transpose()) * 0.5;
    for i in 0..l2.nrows() {
        l2[(i, i)] += sigma_l;
    }
    let alpha = l2.norm().ceil();
    let l3 = l2 * ((n * n) as f64 / alpha);
    Ok(LiftedObjective {
        n,
        lq: lq.lq.clone(),
        l3,
        sigma_l,
        alpha,
    })
}

pub fn unscale_value(v3: f64, lq: &LiftedObjective) -> f64 {
    lq.unscale_value(v3)
}

/// How the Y-projection treats one entry of a lifted matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryKind {
    /// `(0, 0)`, fixed to one.
    Corner,
    /// In the gangster set (or its mirror), fixed to zero.
    Gangster,
    /// Diagonal or first row/column, off the corner.
    Arrow,
    Free,
}

/// The gangster index set `J̄`: `(0,0)` plus the off-diagonal entries of the
/// diagonal blocks and the diagonal entries of the off-diagonal blocks.
#[derive(Clone, Debug)]
pub struct GangsterIndexSet {
    pub n: usize,
    /// Upper-triangle pairs `(i, j)` with `i <= j`, `(0, 0)` first.
    pub pairs: Vec<(usize, usize)>,
    kinds: Vec<EntryKind>,
}

impl GangsterIndexSet {
    pub fn dim(&self) -> usize {
        self.n * self.n + 1
    }

    #[inline]
    pub fn kind(&self, i: usize, j: usize) -> EntryKind {
        self.kinds[i * self.dim() + j]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        matches!(self.kind(i, j), EntryKind::Corner | EntryKind::Gangster)
    }

    pub fn expected_len(n: usize) -> usize {
        1 + n * n * (n - 1) / 2 + n * (n - 1) / 2 * n
    }
}

pub fn gangster_index_set(n: usize) -> GangsterIndexSet {
    let dim = n * n + 1;
    let mut kinds = vec![EntryKind::Free; dim * dim];
    let mut pairs = vec![(0, 0)];
    for i in 0..dim {
        for j in 0..dim {
            let kind = if i == 0 && j == 0 {
                EntryKind::Corner
            } else if i == 0 || j == 0 || i == j {
                EntryKind::Arrow
            } else {
                let (ri, ci) = ((i - 1) % n, (i - 1) / n);
                let (rj, cj) = ((j - 1) % n, (j - 1) / n);
                if (ci == cj) != (ri == rj) {
                    EntryKind::Gangster
                } else {
                    EntryKind::Free
                }
            };
            if kind == EntryKind::Gangster && i < j {
                pairs.push((i, j));
            }
            kinds[i * dim + j] = kind;
        }
    }
    GangsterIndexSet { n, pairs, kinds }
}

/// Keeps the entries indexed by `J̄` (and their mirrors), zeroes the rest.
pub fn gangster_project(y: &DMatrix<f64>, j: &GangsterIndexSet) -> Result<DMatrix<f64>> {
    check_square(y, j.dim())?;
    Ok(DMatrix::from_fn(j.dim(), j.dim(), |r, c| {
        if j.contains(r, c) {
            y[(r, c)]
        } else {
            0.0
        }
    }))
}

pub(crate) fn check_square(m: &DMatrix<f64>, dim: usize) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(QapError::DimensionMismatch {
            expected: dim,
            found: if m.nrows() != dim { m.nrows() } else { m.ncols() },
        });
    }
    Ok(())
}

/// Orthonormal basis `V̂` of the minimal face, with the exposing matrix `K`
/// and the assignment constraint matrix `H` it is checked against.
#[derive(Clone, Debug)]
pub struct FacialBasis {
    pub n: usize,
    pub vhat: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

impl FacialBasis {
    /// Replaces `V̂` by `V̂ Q` for an orthogonal `Q`, another orthonormal
    /// basis of the same range.
    pub fn rotated(&self, q: &DMatrix<f64>) -> Result<FacialBasis> {
        check_square(q, self.vhat.ncols())?;
        let qtq = q.transpose() * q;
        let err = (qtq - DMatrix::identity(q.nrows(), q.ncols())).amax();
        if err > 1e-10 {
            return Err(QapError::Numerical(format!(
                "rotation is not orthogonal (error {err:e})"
            )));
        }
        Ok(FacialBasis {
            vhat: &self.vhat * q,
            ..self.clone()
        })
    }

    /// `P_V = V̂ V̂^T`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.vhat * self.vhat.transpose()
    }
}

/// `H = [e^T ⊗ I; I ⊗ e^T]`, so `H vec(X) = (X e; X^T e)`.
pub fn assignment_matrix(n: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(2 * n, n * n);
    for col in 0..n {
        for row in 0..n {
            let k = col * n + row;
            h[(row, k)] = 1.0;
            h[(n + col, k)] = 1.0;
        }
    }
    h
}

pub fn build_vhat(n: usize) -> FacialBasis {
    assert!(n >= 2, "problem order must be at least 2");
    let dim = n * n + 1;
    let m = (n - 1) * (n - 1) + 1;

    let mut ve = DMatrix::zeros(n, n - 1);
    for i in 0..n - 1 {
        ve[(i, i)] = 1.0;
        ve[(n - 1, i)] = -1.0;
    }
    let vv = ve.kronecker(&ve);
    let mut raw = DMatrix::zeros(dim, m);
    raw[(0, 0)] = 1.0;
    for r in 1..dim {
        raw[(r, 0)] = 1.0 / n as f64;
    }
    raw.view_mut((1, 1), (n * n, m - 1)).copy_from(&vv);
    let vhat = raw.qr().q();

    let h = assignment_matrix(n);
    let mut outer = DMatrix::zeros(2 * n, dim);
    outer.column_mut(0).fill(-1.0);
    outer.view_mut((0, 1), (2 * n, n * n)).copy_from(&h);
    let k = outer.transpose() * outer;

    FacialBasis { n, vhat, k, h }
}

/// Average of all lifted permutation matrices, in closed form.
pub fn barycenter(n: usize) -> DMatrix<f64> {
    let dim = n * n + 1;
    let nf = n as f64;
    let pair = 1.0 / (nf * (nf - 1.0));
    DMatrix::from_fn(dim, dim, |i, j| {
        if i == 0 && j == 0 {
            1.0
        } else if i == 0 || j == 0 || i == j {
            1.0 / nf
        } else {
            let (ri, ci) = ((i - 1) % n, (i - 1) / n);
            let (rj, cj) = ((j - 1) % n, (j - 1) / n);
            if ri == rj || ci == cj {
                0.0
            } else {
                pair
            }
        }
    })
}

/// `(1; vec X)`.
pub fn lift_vector(p: &Permutation) -> DVector<f64> {
    let n = p.len();
    let mut v = DVector::zeros(n * n + 1);
    v[0] = 1.0;
    for (row, &col) in p.as_slice().iter().enumerate() {
        v[lifted_index(n, row, col)] = 1.0;
    }
    v
}

/// `(1; vec X)(1; vec X)^T`.
pub fn lift_permutation(p: &Permutation) -> DMatrix<f64> {
    let v = lift_vector(p);
    &v * v.transpose()
}

/// Sum of the `n` diagonal blocks of the trailing block.
pub fn bodiag(y: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        out += y.view((1 + k * n, 1 + k * n), (n, n));
    }
    out
}

/// Matrix of traces of the `n x n` blocks of the trailing block.
pub fn o0diag(y: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |j, l| y.view((1 + j * n, 1 + l * n), (n, n)).trace())
}

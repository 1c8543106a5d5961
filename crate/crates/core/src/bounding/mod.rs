//! Certified lower bounds from the dual functional and feasible upper bounds
//! from nearest-permutation rounding.

mod lap;

pub use lap::{lap_solve, nearest_permutation};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::instance::{qap_objective, Permutation, QapInstance};
use crate::lifting::{
    check_square, lifted_index, EntryKind, FacialBasis, GangsterIndexSet, LiftedObjective,
};
use crate::linalg::{compress, lambda_max, sym_eigen};

/// Eigenpairs of an iterate with eigenvalue at or below this are discarded
/// by the spectral rounding.
pub const EIGEN_KEEP: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundCert {
    /// `g(Z)` in scaled units.
    pub g_value: f64,
    pub unscaled: f64,
    pub strengthened: f64,
    /// `lambda_max(V̂^T Z V̂)`.
    pub lambda_max: f64,
    /// SHA-256 of the column-major little-endian bytes of `Z`.
    pub z_snapshot_hash: String,
}

/// Evaluates `g(Z) = min_{Y in 𝓨} <L3 + Z, Y> - (n+1) lambda_max(V̂^T Z V̂)`.
///
/// Valid for every symmetric `Z`: the unscaled value never exceeds the QAP
/// optimum. `strengthened` is filled with the unscaled value; callers apply
/// [`strengthen_lower_bound`] with the instance at hand.
pub fn dual_lower_bound(
    z: &DMatrix<f64>,
    lq: &LiftedObjective,
    basis: &FacialBasis,
    j: &GangsterIndexSet,
) -> Result<LowerBoundCert> {
    let dim = j.dim();
    check_square(z, dim)?;
    check_square(&lq.l3, dim)?;
    let m = &lq.l3 + z;
    let mut inner = 0.0;
    for c in 0..dim {
        for r in 0..dim {
            inner += match j.kind(r, c) {
                EntryKind::Corner => m[(r, c)],
                EntryKind::Gangster => 0.0,
                EntryKind::Arrow | EntryKind::Free => m[(r, c)].min(0.0),
            };
        }
    }
    let lmax = lambda_max(&compress(&basis.vhat, z))?;
    let g_value = inner - (lq.n as f64 + 1.0) * lmax;
    let unscaled = lq.unscale_value(g_value);
    Ok(LowerBoundCert {
        g_value,
        unscaled,
        strengthened: unscaled,
        lambda_max: lmax,
        z_snapshot_hash: snapshot_hash(z),
    })
}

pub fn snapshot_hash(z: &DMatrix<f64>) -> String {
    let mut hasher = Sha256::new();
    for v in z.iter() {
        hasher.update(v.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Rounds a lower bound up using integrality of the objective.
///
/// For integral data with `C = 0` the optimum is an integer; if both `A`
/// and `B` also have zero diagonals it is even. The tolerance below the
/// ceiling is relative so unscaling roundoff on large objectives does not
/// lose a unit.
pub fn strengthen_lower_bound(lb: f64, inst: &QapInstance) -> f64 {
    if !lb.is_finite() || !inst.integral() || inst.has_linear_term() {
        return lb;
    }
    let tol = 1e-9 * lb.abs().max(1.0);
    let up = (lb - tol).ceil();
    let zero_diagonals = inst.a().diagonal().iter().all(|&v| v == 0.0)
        && inst.b().diagonal().iter().all(|&v| v == 0.0);
    if zero_diagonals && up.rem_euclid(2.0) != 0.0 {
        up + 1.0
    } else {
        up
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    FirstColumn,
    SpectralPerturbed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundCand {
    pub value: f64,
    pub perm: Permutation,
    pub source: CandidateSource,
    /// Zero for the first-column candidate, `1..` for the spectral trials.
    pub trial: usize,
}

/// Number of spectral trials, `3 ceil(ln n)`.
pub fn spectral_trials(n: usize) -> usize {
    3 * (n as f64).ln().ceil() as usize
}

/// `X̄` read from entries `1..=n^2` of the first column of `y`.
pub fn first_column_xbar(y: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |row, col| y[(lifted_index(n, row, col), 0)])
}

/// Eigenpairs of `y` with eigenvalue above [`EIGEN_KEEP`], ordered by
/// decreasing eigenvalue. Each vector is signed so its first entry is
/// nonnegative (its largest-magnitude entry positive when the first is zero).
pub fn retained_eigenpairs(y: &DMatrix<f64>) -> Result<Vec<(f64, DVector<f64>)>> {
    let eig = sym_eigen(y.clone())?;
    let mut pairs: Vec<(f64, DVector<f64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > EIGEN_KEEP)
        .map(|(i, &l)| {
            let mut v = eig.eigenvectors.column(i).clone_owned();
            let lead = if v[0].abs() > 1e-12 {
                v[0]
            } else {
                v[v.iamax()]
            };
            if lead < 0.0 {
                v.neg_mut();
            }
            (l, v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(pairs)
}

/// `vec(X̄) = sum_i xi_i lambda_i v_i[1..]`.
///
/// # Panics
///
/// If `xi` and `pairs` differ in length.
pub fn spectral_xbar(pairs: &[(f64, DVector<f64>)], xi: &[f64], n: usize) -> DMatrix<f64> {
    assert_eq!(pairs.len(), xi.len(), "one weight per eigenpair");
    let mut x = DMatrix::zeros(n, n);
    for ((lambda, v), &w) in pairs.iter().zip(xi) {
        for col in 0..n {
            for row in 0..n {
                x[(row, col)] += w * lambda * v[lifted_index(n, row, col)];
            }
        }
    }
    x
}

/// Rounds `y` to permutations: the first-column candidate followed by
/// `3 ceil(ln n)` spectral trials with decreasing `Uniform(0,1)` weights.
/// Returns the best candidate (earliest on ties) and all of them.
pub fn upper_bound_from_iterate(
    y: &DMatrix<f64>,
    inst: &QapInstance,
    rng_seed: u64,
) -> Result<(UpperBoundCand, Vec<UpperBoundCand>)> {
    let n = inst.n();
    check_square(y, n * n + 1)?;
    let mut all = Vec::new();

    let perm = nearest_permutation(&first_column_xbar(y, n));
    all.push(UpperBoundCand {
        value: qap_objective(inst, &perm)?,
        perm,
        source: CandidateSource::FirstColumn,
        trial: 0,
    });

    let pairs = retained_eigenpairs(y)?;
    if !pairs.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        for trial in 1..=spectral_trials(n) {
            let mut xi: Vec<f64> = (0..pairs.len()).map(|_| rng.random::<f64>()).collect();
            xi.sort_by(|a, b| b.total_cmp(a));
            let perm = nearest_permutation(&spectral_xbar(&pairs, &xi, n));
            all.push(UpperBoundCand {
                value: qap_objective(inst, &perm)?,
                perm,
                source: CandidateSource::SpectralPerturbed,
                trial,
            });
        }
    }

    let best = all
        .iter()
        .fold(None::<&UpperBoundCand>, |acc, c| match acc {
            Some(b) if b.value <= c.value => Some(b),
            _ => Some(c),
        })
        .cloned()
        .expect("at least the first-column candidate");
    Ok((best, all))
}

/// `100 * 2 (ubd - lbd) / (ubd + lbd + 1)`.
pub fn relative_gap(lbd: f64, ubd: f64) -> f64 {
    100.0 * 2.0 * (ubd - lbd) / (ubd + lbd + 1.0)
}

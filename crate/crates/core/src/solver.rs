//! Restricted contractive Peaceman-Rachford splitting for the facially
//! reduced DNN relaxation, with an ADMM baseline mode.
//!
//! One iteration of the restricted scheme:
//!
//! ```text
//! R     = P_R(V̂^T (Y + Z/β) V̂)
//! Z_h   = Z + γβ P_Z0(Y - V̂RV̂^T)
//! Y     = P_Y(V̂RV̂^T - (L3 + Z_h)/β)
//! Z     = Z_h + γβ P_Z0(Y - V̂RV̂^T)
//! ```
//!
//! The baseline skips the half step and updates `Z` once, unrestricted.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bounding::{
    dual_lower_bound, strengthen_lower_bound, upper_bound_from_iterate, LowerBoundCert,
};
use crate::error::{QapError, Result};
use crate::instance::{Permutation, QapInstance};
use crate::lifting::{
    barycenter, build_lq, build_vhat, check_square, gangster_index_set, scale_lq, FacialBasis,
    GangsterIndexSet, LiftedObjective,
};
use crate::linalg::{compress, congruence};
use crate::projections::{in_za, project_onto_y, project_r, project_y, project_z0, project_za};

/// Bounds closer than this (original units) count as unchanged.
pub const BOUND_STALL_TOL: f64 = 1e-9;

/// Largest dual step accepted in ADMM mode.
pub const ADMM_GAMMA_MAX: f64 = 1.618_033_988_749_895;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    #[default]
    Rprsm,
    Admm,
}

impl fmt::Display for SolverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverMode::Rprsm => "rprsm",
            SolverMode::Admm => "admm",
        })
    }
}

impl FromStr for SolverMode {
    type Err = QapError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rprsm" => Ok(SolverMode::Rprsm),
            "admm" => Ok(SolverMode::Admm),
            other => Err(QapError::InvalidParams(format!("unknown solver mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub beta: f64,
    pub gamma: f64,
    pub maxiter: usize,
    /// Primal/dual residual tolerance for the consecutive-iterations test.
    pub eps: f64,
    /// KKT residual tolerance.
    pub delta: f64,
    pub m_t: usize,
    pub m_l: usize,
    pub m_u: usize,
    pub bound_every: usize,
    pub mode: SolverMode,
    pub seed: u64,
    pub use_kkt_stop: bool,
    /// Stop as soon as the best lower bound reaches the best upper bound.
    pub stop_on_gap_closure: bool,
}

impl SolverParams {
    /// `beta = n/3`, `gamma = 0.9` (1.618 for ADMM), `maxiter = 40000`,
    /// `eps = delta = 1e-5`, windows of 100, bounds every 100 iterations,
    /// KKT stopping for `n > 20`.
    pub fn defaults(n: usize, mode: SolverMode) -> Self {
        SolverParams {
            beta: n as f64 / 3.0,
            gamma: match mode {
                SolverMode::Rprsm => 0.9,
                SolverMode::Admm => ADMM_GAMMA_MAX,
            },
            maxiter: 40_000,
            eps: 1e-5,
            delta: 1e-5,
            m_t: 100,
            m_l: 100,
            m_u: 100,
            bound_every: 100,
            mode,
            seed: 0,
            use_kkt_stop: n > 20,
            stop_on_gap_closure: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(QapError::InvalidParams(msg));
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        match self.mode {
            SolverMode::Rprsm if !(self.gamma > 0.0 && self.gamma < 1.0) => {
                return bad(format!("rprsm needs gamma in (0,1), got {}", self.gamma));
            }
            SolverMode::Admm if !(self.gamma > 0.0 && self.gamma <= ADMM_GAMMA_MAX) => {
                return bad(format!("admm needs gamma in (0,1.618], got {}", self.gamma));
            }
            _ => {}
        }
        if !(self.eps > 0.0 && self.delta > 0.0) {
            return bad("eps and delta must be positive".into());
        }
        if self.maxiter == 0 || self.bound_every == 0 {
            return bad("maxiter and bound_every must be at least 1".into());
        }
        if self.m_t == 0 || self.m_l == 0 || self.m_u == 0 {
            return bad("m_t, m_l and m_u must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DnnIterate {
    pub r: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub k: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIter,
    Residual,
    StalledBounds,
    Kkt,
    GapClosed,
}

/// One bound evaluation, in original objective units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEval {
    pub k: usize,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub iterate: DnnIterate,
    /// Best certified lower bound, capped at `ubd`.
    pub lbd: f64,
    pub ubd: f64,
    pub best_perm: Permutation,
    pub iters: usize,
    pub stop_reason: StopReason,
    /// `(||Y - V̂RV̂^T|| / ||Y||, β ||Y^k - Y^{k-1}||)` per iteration.
    pub residual_history: Vec<(f64, f64)>,
    pub bound_history: Vec<BoundEval>,
    pub best_lower_cert: LowerBoundCert,
    pub time_sec: f64,
}

/// `<L3, Y> + <Z, Y - V̂RV̂^T> + β/2 ||Y - V̂RV̂^T||^2`.
pub fn augmented_lagrangian(
    r: &DMatrix<f64>,
    y: &DMatrix<f64>,
    z: &DMatrix<f64>,
    lq: &LiftedObjective,
    beta: f64,
    basis: &FacialBasis,
) -> f64 {
    let resid = y - congruence(&basis.vhat, r);
    lq.l3.dot(y) + z.dot(&resid) + 0.5 * beta * resid.norm_squared()
}

pub fn r_update(
    y: &DMatrix<f64>,
    z: &DMatrix<f64>,
    beta: f64,
    basis: &FacialBasis,
) -> Result<DMatrix<f64>> {
    let dim = basis.vhat.nrows();
    check_square(y, dim)?;
    check_square(z, dim)?;
    let w = compress(&basis.vhat, &(y + z / beta));
    project_r(&w, basis.n as f64 + 1.0)
}

pub fn y_update(
    r: &DMatrix<f64>,
    z_half: &DMatrix<f64>,
    lq: &LiftedObjective,
    beta: f64,
    basis: &FacialBasis,
    j: &GangsterIndexSet,
) -> Result<DMatrix<f64>> {
    y_step(&congruence(&basis.vhat, r), z_half, lq, beta, j)
}

fn y_step(
    vrv: &DMatrix<f64>,
    z_half: &DMatrix<f64>,
    lq: &LiftedObjective,
    beta: f64,
    j: &GangsterIndexSet,
) -> Result<DMatrix<f64>> {
    check_square(z_half, j.dim())?;
    let t = vrv - (&lq.l3 + z_half) / beta;
    project_y(&t, vrv, j)
}

pub fn z_update(
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
    r: &DMatrix<f64>,
    gamma: f64,
    beta: f64,
    basis: &FacialBasis,
    restricted: bool,
) -> DMatrix<f64> {
    z_step(z, &(y - congruence(&basis.vhat, r)), gamma, beta, restricted)
}

fn z_step(
    z: &DMatrix<f64>,
    resid: &DMatrix<f64>,
    gamma: f64,
    beta: f64,
    restricted: bool,
) -> DMatrix<f64> {
    if restricted {
        z + project_z0(resid) * (gamma * beta)
    } else {
        z + resid * (gamma * beta)
    }
}

/// `(rR, rY, rP)`: distances from the optimality conditions
/// `R = P_R(R + V̂^T Z V̂)`, `Y = P_Y(Y - L3 - Z)` and `Y = V̂RV̂^T`.
pub fn kkt_residuals(
    it: &DnnIterate,
    lq: &LiftedObjective,
    basis: &FacialBasis,
    j: &GangsterIndexSet,
) -> Result<(f64, f64, f64)> {
    let s = basis.n as f64 + 1.0;
    let rr = (&it.r - project_r(&(&it.r + compress(&basis.vhat, &it.z)), s)?).norm();
    let ry = (&it.y - project_onto_y(&(&it.y - &lq.l3 - &it.z), j)?).norm();
    let rp = (&it.y - congruence(&basis.vhat, &it.r)).norm();
    Ok((rr, ry, rp))
}

/// Per-evaluation generator seed derived from the run seed and iteration.
pub fn derive_seed(seed: u64, k: usize) -> u64 {
    let mut x = seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Solver state for one instance. [`Solver::step`] advances one iteration;
/// [`Solver::run`] applies the stopping rules.
pub struct Solver<'a> {
    inst: &'a QapInstance,
    params: SolverParams,
    basis: FacialBasis,
    j: GangsterIndexSet,
    lq: LiftedObjective,
    it: DnnIterate,
    /// Residuals of the latest step.
    last: (f64, f64),
}

impl<'a> Solver<'a> {
    pub fn new(inst: &'a QapInstance, params: SolverParams) -> Result<Self> {
        Self::with_basis(inst, params, build_vhat(inst.n()))
    }

    /// Uses the given orthonormal basis of the face instead of the default.
    pub fn with_basis(
        inst: &'a QapInstance,
        params: SolverParams,
        basis: FacialBasis,
    ) -> Result<Self> {
        params.validate()?;
        let n = inst.n();
        if basis.n != n {
            return Err(QapError::DimensionMismatch {
                expected: n,
                found: basis.n,
            });
        }
        let lq = scale_lq(&build_lq(inst), &basis)?;
        let j = gangster_index_set(n);
        let dim = n * n + 1;
        let y = barycenter(n);
        let z = project_za(&DMatrix::zeros(dim, dim), &lq.l3)?;
        let m = basis.vhat.ncols();
        Ok(Solver {
            inst,
            params,
            basis,
            j,
            lq,
            it: DnnIterate {
                r: DMatrix::zeros(m, m),
                y,
                z,
                k: 0,
            },
            last: (f64::INFINITY, f64::INFINITY),
        })
    }

    pub fn iterate(&self) -> &DnnIterate {
        &self.it
    }

    pub fn objective(&self) -> &LiftedObjective {
        &self.lq
    }

    pub fn basis(&self) -> &FacialBasis {
        &self.basis
    }

    pub fn gangster(&self) -> &GangsterIndexSet {
        &self.j
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    /// Residuals `(primal, dual)` of the latest step.
    pub fn residuals(&self) -> (f64, f64) {
        self.last
    }

    pub fn step(&mut self) -> Result<()> {
        let SolverParams {
            beta, gamma, mode, ..
        } = self.params;
        let r = r_update(&self.it.y, &self.it.z, beta, &self.basis)?;
        let vrv = congruence(&self.basis.vhat, &r);
        let (y, z) = match mode {
            SolverMode::Rprsm => {
                let z_half = z_step(&self.it.z, &(&self.it.y - &vrv), gamma, beta, true);
                let y = y_step(&vrv, &z_half, &self.lq, beta, &self.j)?;
                let z = z_step(&z_half, &(&y - &vrv), gamma, beta, true);
                (y, z)
            }
            SolverMode::Admm => {
                let y = y_step(&vrv, &self.it.z, &self.lq, beta, &self.j)?;
                let z = z_step(&self.it.z, &(&y - &vrv), gamma, beta, false);
                (y, z)
            }
        };
        if z.iter().any(|v| !v.is_finite()) {
            return Err(QapError::Numerical(format!(
                "dual iterate diverged at iteration {}",
                self.it.k + 1
            )));
        }
        let primal = (&y - &vrv).norm() / y.norm().max(f64::MIN_POSITIVE);
        let dual = beta * (&y - &self.it.y).norm();
        self.last = (primal, dual);
        self.it = DnnIterate {
            r,
            y,
            z,
            k: self.it.k + 1,
        };
        self.debug_check();
        Ok(())
    }

    fn debug_check(&self) {
        if cfg!(debug_assertions) {
            let n = self.inst.n() as f64;
            debug_assert!((self.it.r.trace() - (n + 1.0)).abs() < 1e-8 * (n + 1.0));
            debug_assert!(self.it.y.iter().all(|v| (0.0..=1.0).contains(v)));
            debug_assert_eq!(self.it.y[(0, 0)], 1.0);
            if self.params.mode == SolverMode::Rprsm {
                debug_assert!(in_za(&self.it.z, &self.lq.l3, 1e-9 * self.lq.l3.amax().max(1.0)));
            }
        }
    }

    pub fn lower_bound(&self) -> Result<LowerBoundCert> {
        let mut cert = dual_lower_bound(&self.it.z, &self.lq, &self.basis, &self.j)?;
        cert.strengthened = strengthen_lower_bound(cert.unscaled, self.inst);
        Ok(cert)
    }

    pub fn run(self) -> Result<SolveResult> {
        self.run_with(|_| {})
    }

    /// Like [`Solver::run`], calling `observe` after every iteration.
    pub fn run_with(mut self, mut observe: impl FnMut(&DnnIterate)) -> Result<SolveResult> {
        let start = Instant::now();
        let p = self.params.clone();
        let mut history = Vec::new();
        let mut bound_history = Vec::new();
        let mut best_lower: Option<LowerBoundCert> = None;
        let mut best_upper: Option<(f64, Permutation)> = None;
        let (mut small_run, mut lower_stall, mut upper_stall) = (0usize, 0usize, 0usize);

        let stop = loop {
            self.step()?;
            observe(&self.it);
            let k = self.it.k;
            let (primal, dual) = self.last;
            history.push((primal, dual));

            small_run = if primal.max(dual) < p.eps { small_run + 1 } else { 0 };
            let mut reason = None;
            if small_run >= p.m_t {
                reason = Some(StopReason::Residual);
            }
            if reason.is_none() && p.use_kkt_stop {
                let (rr, ry, rp) = kkt_residuals(&self.it, &self.lq, &self.basis, &self.j)?;
                if rr.max(ry).max(rp) < p.delta {
                    reason = Some(StopReason::Kkt);
                }
            }
            if reason.is_none() && k >= p.maxiter {
                reason = Some(StopReason::MaxIter);
            }

            if k.is_multiple_of(p.bound_every) || reason.is_some() {
                let cert = self.lower_bound()?;
                let (cand, _) =
                    upper_bound_from_iterate(&self.it.y, self.inst, derive_seed(p.seed, k))?;
                bound_history.push(BoundEval {
                    k,
                    lower: cert.strengthened,
                    upper: cand.value,
                });
                match &best_lower {
                    Some(b) if cert.strengthened <= b.strengthened + BOUND_STALL_TOL => {
                        lower_stall += 1
                    }
                    _ => {
                        lower_stall = 0;
                        best_lower = Some(cert);
                    }
                }
                match &best_upper {
                    Some((v, _)) if cand.value >= v - BOUND_STALL_TOL => upper_stall += 1,
                    _ => {
                        upper_stall = 0;
                        best_upper = Some((cand.value, cand.perm));
                    }
                }
                let lb = best_lower.as_ref().map(|c| c.strengthened).unwrap_or(f64::NEG_INFINITY);
                let ub = best_upper.as_ref().map(|b| b.0).unwrap_or(f64::INFINITY);
                if reason.is_none() && p.stop_on_gap_closure && lb >= ub - BOUND_STALL_TOL * ub.abs().max(1.0) {
                    reason = Some(StopReason::GapClosed);
                }
                if reason.is_none() && (lower_stall >= p.m_l || upper_stall >= p.m_u) {
                    reason = Some(StopReason::StalledBounds);
                }
            }
            if let Some(r) = reason {
                break r;
            }
        };

        let best_lower_cert = best_lower.expect("bounds evaluated at the final iteration");
        let (ubd, best_perm) = best_upper.expect("bounds evaluated at the final iteration");
        Ok(SolveResult {
            lbd: best_lower_cert.strengthened.min(ubd),
            ubd,
            best_perm,
            iters: self.it.k,
            stop_reason: stop,
            residual_history: history,
            bound_history,
            best_lower_cert,
            time_sec: start.elapsed().as_secs_f64(),
            iterate: self.it,
        })
    }
}

pub fn solve(inst: &QapInstance, params: &SolverParams) -> Result<SolveResult> {
    Solver::new(inst, params.clone())?.run()
}

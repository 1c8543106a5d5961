//! Bounds for the quadratic assignment problem from a facially reduced
//! doubly nonnegative relaxation, solved by restricted Peaceman-Rachford
//! splitting.
//!
//! ```no_run
//! use qapdnn::{parse_instance, solve, SolverMode, SolverParams};
//!
//! let bytes = std::fs::read("had12.dat").unwrap();
//! let inst = parse_instance(&bytes, "had12").unwrap();
//! let res = solve(&inst, &SolverParams::defaults(inst.n(), SolverMode::Rprsm)).unwrap();
//! println!("{} <= opt <= {}", res.lbd, res.ubd);
//! ```

pub mod bounding;
pub mod error;
pub mod instance;
pub mod lifting;
pub mod linalg;
pub mod projections;
pub mod qaplib;
pub mod solver;

pub use bounding::{
    dual_lower_bound, lap_solve, nearest_permutation, relative_gap, strengthen_lower_bound,
    upper_bound_from_iterate, LowerBoundCert, UpperBoundCand,
};
pub use error::{QapError, Result};
pub use instance::{brute_force_opt, qap_objective, Permutation, QapInstance, MAX_ORACLE_N};
pub use qaplib::{known_optimum, parse_instance, BoundsReport, ReportFormat};
pub use solver::{solve, SolveResult, Solver, SolverMode, SolverParams, StopReason};

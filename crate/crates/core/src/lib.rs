//! Feasible full-Newton-step primal-dual interior-point method for
//!
//! ```text
//! min f(x)  s.t.  Ax = b, x >= 0
//! ```
//!
//! with convex, twice differentiable `f`. Search directions come from the
//! algebraically transformed centering equation `ψ(w²) = ψ(e)` with
//! `ψ(t) = t^(r/2)`, `r = 1, 2, ...`. Each iteration shrinks the barrier
//! parameter by `(1 - θ)` and takes one undamped Newton step; every step is
//! audited against the inequalities that guarantee the polynomial bound.

pub mod centralpath;
pub mod error;
pub mod format;
pub mod ldl;
pub mod newton;
pub mod problem;
pub mod solver;
pub mod verifier;

pub use centralpath::{
    check_gap_excess_ratio, contraction_coefficient, monitor_step, p_vector, proximity,
    scaled_directions, scaled_system_matrices, scaling_vector, IterateState, MonitorReport,
    ScaledDirections,
};
pub use error::{Error, Result};
pub use format::{parse_instance, serialize_instance};
pub use newton::{assemble_and_factor, newton_rhs, newton_step, KktFactorization, NewtonStep};
pub use problem::{
    generate_instance, objective_eval, validate_start, ConvexOracle, FeasibilityReport,
    ObjectiveEval, ObjectiveKind, ObjectiveSpec, Problem, StartPoint,
};
pub use solver::{
    default_theta, gamma_threshold, iteration_bound, solve, write_trace_csv, SolveResult,
    SolveStatus, SolverConfig, TraceRecord,
};
pub use verifier::{
    kkt_residuals, reference_solve_lp, reference_solve_qp, KktResiduals, ReferenceMethod,
    ReferenceSolution,
};

//! Cross-products LASSO: an ℓ₁ fit with an extra penalty on products of
//! coefficient magnitudes closer than the refractory gap, solved by
//! successive convex approximation.

mod admm;
mod barrier;
mod gamma;
mod problem;
mod sca;

pub use admm::{
    distance_to_range, equality_gap, solve_inner, AdmmState, InnerOptions, InnerSolution,
    InnerSolver,
};
pub use barrier::{solve_inner_barrier, BARRIER_LIMIT};
pub use gamma::{build_gamma, split_gamma, CrossProductPenalty, SplitPenalty, EXPLICIT_LIMIT};
pub use problem::{approx_cost, exact_cost, CpLassoProblem, Formulation, Surrogate};
pub use sca::{solve_sca, ScaOptions, ScaReport};

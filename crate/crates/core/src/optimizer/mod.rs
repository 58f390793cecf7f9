//! Dual decomposition of the joint power / threshold problem.
//!
//! For a fixed threshold the problem is concave in the two power functions
//! and only the average-power constraint is dualized. The interference limit
//! stays inside the maximization as a pointwise cap on `P_t^1`, which makes
//! the maximizer the capped water-filling of [`power_allocation`]. The dual is
//! minimized by a projected subgradient iteration ([`subgradient_solve`]) and
//! the threshold is chosen by [`threshold_search`].

mod concavity;
mod dual;
mod golden;
mod search;
mod solve;

pub use concavity::{
    concavity_check, ConcavityReport, CurveShape, CONCAVITY_TOLERANCE, FLAT_TOLERANCE,
};
pub use dual::{dual_function, lagrangian, power_allocation, subgradient, DualEvaluation};
pub use golden::golden_section_max;
pub use search::{linspace, threshold_search, SearchOutcome, SearchSettings, SweepRow};
pub use solve::{
    subgradient_solve, DualState, IterationRecord, OptimizationResult, SolverSettings, StepRule,
};

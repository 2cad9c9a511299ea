//! Exact minimum-cost counterfactual search: a dense simplex LP solver and a
//! branch-and-bound MILO layer over ReLU activation indicators.

pub mod lp;
pub mod milo;

pub use lp::{Constraint, LinearProgram, LpOutcome, Sense};
pub use milo::{
    big_m_bounds, encode, preactivation_bounds, solve_armin, solve_milo, InputBox, MiloProblem,
    MiloSolution, MiloStatus, MixedIntegerModel, SolverError,
};

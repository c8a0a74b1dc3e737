//! A small mixed-integer linear programming engine.
//!
//! Build a [`Model`], then hand it to [`solve`] (or any [`MilpSolver`]). The
//! embedded engine presolves bounds, splits the model into independent
//! components and runs best-first branch and bound on a bounded-variable
//! simplex. Components too large for the dense simplex fall back to the
//! caller's warm start plus a Lagrangian dual bound.

mod bnb;
mod error;
mod lagrange;
mod lp_format;
mod model;
mod presolve;
mod simplex;

pub use bnb::{
    solve, solve_with, solver_by_name, BranchAndBound, Limits, MilpSolver, Solution, Status,
};
pub use error::{ModelError, SolveError};
pub use lp_format::to_lp_string;
pub use model::{Constraint, Model, ObjectiveSense, Relation, RowId, VarId, Variable};

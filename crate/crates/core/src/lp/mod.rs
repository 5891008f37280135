//! Linear programming in standard equality form, solved by a two-phase
//! revised simplex method.

mod lu;
mod problem;
mod simplex;

pub use lu::SparseLu;
pub use problem::{CscMatrix, LpProblem};
pub use simplex::{solve, solve_with, LpSolution, LpStatus, SimplexOptions};

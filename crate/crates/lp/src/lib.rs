//! Exact solvers for the small linear and mixed-integer programs that show up
//! in collective robustness certificates.
//!
//! The programs here have at most a few hundred variables, so everything is
//! dense: a two-phase tableau simplex for the relaxation and a best-first
//! branch-and-bound on top of it for integrality.

mod branch;
mod lpfile;
mod program;
mod simplex;

pub use branch::{solve_milp, MilpOptions};
pub use lpfile::write_lp;
pub use program::{Constraint, LinearProgram, MixedProgram, RowSense};
pub use simplex::solve_lp;

/// Primal feasibility tolerance applied to every reported optimum.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Distance to the nearest integer below which a value counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum LpError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("program has {count} integer variables, above the cap of {cap}; use the linear relaxation")]
    Capacity { count: usize, cap: usize },
    #[error("numerical failure: returned point violates the program by {0:e}")]
    Numerical(f64),
}

pub type Result<T> = std::result::Result<T, LpError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: Status,
    /// Variable values; empty unless `status` is `Optimal`.
    pub values: Vec<f64>,
    /// Objective at `values`; `+inf` when infeasible, `-inf` when unbounded.
    pub objective: f64,
    /// Branch-and-bound nodes created after the root (0 for plain LP solves).
    pub branches: usize,
}

impl SolveResult {
    pub(crate) fn infeasible() -> Self {
        SolveResult { status: Status::Infeasible, values: Vec::new(), objective: f64::INFINITY, branches: 0 }
    }

    pub(crate) fn unbounded() -> Self {
        SolveResult { status: Status::Unbounded, values: Vec::new(), objective: f64::NEG_INFINITY, branches: 0 }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

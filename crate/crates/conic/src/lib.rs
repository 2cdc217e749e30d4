//! Block-structured conic programs over products of small PSD cones and a
//! nonnegative orthant.
//!
//! A [`ConicProblem`] minimizes `sum_j C_j • X_j + c^T s` over symmetric
//! blocks `X_j ⪰ 0` and scalars `s ≥ 0`, subject to rows of the form
//! `sum_j A_ij • X_j + a_i^T s  {=, ≥, ≤}  b_i`. Problems are solved through a
//! [`ConicBackend`]; [`InteriorPoint`] is the embedded primal-dual solver and
//! [`ExternalSdpa`] shells out to an SDPA-format solver.

mod backend;
mod error;
mod ipm;
mod matrix;
mod problem;
pub mod sdpa;
mod standard;

pub use backend::{backend_from_env, ConicBackend, ExternalSdpa, InteriorPoint, BACKEND_ENV, EXTERNAL_COMMAND_ENV};
pub use error::ConicError;
pub use matrix::{frobenius, is_symmetric, min_eigenvalue, psd_check, sorted_eigenvalues, PsdCheck};
pub use problem::{BlockId, ConicProblem, ConstraintRow, RowId, ScalarId, Sense};

use nalgebra::DMatrix;

/// Solver tolerances and limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative primal and dual infeasibility target.
    pub feas_tol: f64,
    /// Relative duality-gap target.
    pub gap_tol: f64,
    /// Slack allowed below zero when certifying PSD blocks.
    pub eig_tol: f64,
    pub max_iter: usize,
    /// Static regularization added to the Schur-complement diagonal,
    /// relative to its largest entry.
    pub regularization: f64,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            eig_tol: 1e-7,
            max_iter: 200,
            regularization: 1e-10,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
    NumericalFailure,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::MaxIter => "max-iter",
            SolveStatus::NumericalFailure => "numerical-failure",
        };
        f.write_str(s)
    }
}

/// Relative residuals of a returned point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    /// `‖b − A(X)‖ / (1 + ‖b‖)` on the row-normalized problem.
    pub primal: f64,
    /// `‖C − A^T y − Z‖ / (1 + ‖C‖)` on the normalized problem.
    pub dual: f64,
    /// Complementarity `(X•Z + x^T z) / (1 + |pobj| + |dobj|)`; never negative.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub block_values: Vec<DMatrix<f64>>,
    pub scalar_values: Vec<f64>,
    /// Dual multiplier per user row, in the sign convention of the row as
    /// written (nonnegative for an active `≥` row in a minimization).
    pub row_duals: Vec<f64>,
    pub objective_value: f64,
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn block(&self, id: BlockId) -> &DMatrix<f64> {
        &self.block_values[id.0]
    }

    pub fn scalar(&self, id: ScalarId) -> f64 {
        self.scalar_values[id.0]
    }
}

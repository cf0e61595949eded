//! Dense linear and quadratic programming plus the discrete Lyapunov solver.
//!
//! Both optimizers return a [`SolveReport`] whose residuals are recomputed
//! from the original problem data, so a caller can always re-check an
//! `Optimal` status against its own tolerance.

mod lp;
mod lyapunov;
mod qp;

pub use lp::{solve_lp, LpProblem, LpSettings};
pub use lyapunov::{dlyap, spectral_radius};
pub use qp::{solve_qp, solve_qp_warm, QpProblem, QpSettings};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default optimality tolerance applied to every KKT residual.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

/// Outcome of an LP or QP solve.
///
/// `dual` follows the Lagrangian `f(x) + y_ineqᵀ(A x − b) + y_eqᵀ(E x − e)`
/// with `y_ineq ≥ 0`. For LPs with variable bounds the vector is extended with
/// lower-bound and upper-bound multipliers, in that order, one per variable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: Status,
    pub x: DVector<f64>,
    pub dual: DVector<f64>,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `|primal − dual objective| / (1 + |primal objective|)`.
    pub duality_gap: f64,
    pub iterations: usize,
    /// Farkas certificate in the layout of `dual` when `status == Infeasible`:
    /// multipliers `y` (nonnegative on inequality rows) with `Σ yᵢ aᵢ = 0` and
    /// `Σ yᵢ bᵢ < 0`.
    pub certificate: Option<DVector<f64>>,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    /// Largest of the three KKT residuals.
    pub fn kkt_residual(&self) -> f64 {
        self.primal_residual
            .max(self.dual_residual)
            .max(self.duality_gap)
    }

    fn without_solution(status: Status, n: usize, n_dual: usize, iterations: usize) -> Self {
        SolveReport {
            status,
            x: DVector::zeros(n),
            dual: DVector::zeros(n_dual),
            objective: f64::NAN,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            duality_gap: f64::NAN,
            iterations,
            certificate: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("cost matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotConvex(f64),
    #[error("spectral radius {0} is not below one")]
    UnstablePhi(f64),
    #[error("linear system is singular")]
    Singular,
}

fn check_finite(name: &str, values: &[f64]) -> Result<(), SolverError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SolverError::InvalidProblem(format!("{name} has non-finite entries")))
    }
}

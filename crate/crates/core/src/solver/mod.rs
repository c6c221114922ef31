//! Numerical solvers: a primal-dual interior point method for the
//! optimization problem, damped Newton for square simulation systems, and
//! finite-difference derivative oracles.

pub mod fd;
mod ipm;
mod ldl;
mod newton;

pub use fd::{fd_jacobian, fd_jacobian_extrapolated, max_relative_error, FdError};
pub use ipm::{solve_nlp, IterationRecord, StepKind};
pub use ldl::{LdlError, SparseLdl};
pub use newton::{solve_newton, NewtonOptions, NewtonReport, SquareSystem};

use std::fmt;
use std::time::Duration;
use thiserror::Error;

/// A smooth nonlinear program
///
/// ```text
/// min f(x)  s.t.  g_l <= g(x) <= g_u,  x_l <= x <= x_u
/// ```
///
/// Equality rows have `g_l == g_u`. Derivative structures use (row, column)
/// coordinates; the Hessian structure lists the lower triangle only.
pub trait Nlp {
    fn num_vars(&self) -> usize;
    fn num_cons(&self) -> usize;
    fn var_bounds(&self) -> (&[f64], &[f64]);
    fn con_bounds(&self) -> (&[f64], &[f64]);
    /// Typical magnitude of each variable. The solver iterates on `x / scale`.
    fn var_scaling(&self) -> Vec<f64> {
        vec![1.0; self.num_vars()]
    }
    fn objective(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
    fn constraints(&self, x: &[f64], g: &mut [f64]);
    fn jacobian_structure(&self) -> &[(usize, usize)];
    fn jacobian_values(&self, x: &[f64], values: &mut [f64]);
    fn hessian_structure(&self) -> &[(usize, usize)];
    /// Lower triangle of `obj_factor * ∇²f + Σ λ_i ∇²g_i`.
    fn hessian_values(&self, x: &[f64], obj_factor: f64, lambda: &[f64], values: &mut [f64]);
    /// Equality rows that are linear combinations of the others. They are
    /// left out of the Newton system but still count towards infeasibility.
    fn redundant_constraints(&self) -> &[usize] {
        &[]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Constraint violation tolerance on the scaled rows.
    pub feasibility_tol: f64,
    /// Scaled dual infeasibility and complementarity tolerance.
    pub optimality_tol: f64,
    pub max_iter: usize,
    pub mu_init: f64,
    /// Linear barrier decrease factor.
    pub mu_linear_decrease: f64,
    /// Superlinear barrier decrease exponent.
    pub mu_superlinear_power: f64,
    pub backtrack_factor: f64,
    /// Smallest primal regularization tried when the KKT inertia is wrong.
    pub regularization_floor: f64,
    /// Iterations the restoration phase may stall before declaring the
    /// problem locally infeasible.
    pub restoration_stall_iters: usize,
    /// Finish with Newton corrections on the equality rows once optimal.
    pub polish: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feasibility_tol: 1e-6,
            optimality_tol: 1e-6,
            max_iter: 500,
            mu_init: 0.1,
            mu_linear_decrease: 0.2,
            mu_superlinear_power: 1.5,
            backtrack_factor: 0.5,
            regularization_floor: 1e-8,
            restoration_stall_iters: 50,
            polish: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [
            self.feasibility_tol,
            self.optimality_tol,
            self.mu_init,
            self.regularization_floor,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || self.max_iter == 0 {
            return Err(SolverError::InvalidOptions(
                "tolerances must be positive and max_iter >= 1".into(),
            ));
        }
        if !(self.mu_linear_decrease > 0.0 && self.mu_linear_decrease < 1.0) {
            return Err(SolverError::InvalidOptions(
                "mu_linear_decrease must lie in (0, 1)".into(),
            ));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(SolverError::InvalidOptions(
                "backtrack_factor must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    InfeasibleDetected,
    IterationLimit,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::InfeasibleDetected => "infeasible-detected",
            SolveStatus::IterationLimit => "iteration-limit",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective: f64,
    /// Max scaled constraint violation, including bounds on inequality rows.
    pub primal_infeasibility: f64,
    /// Scaled stationarity residual.
    pub dual_infeasibility: f64,
    pub complementarity: f64,
    pub final_mu: f64,
    pub elapsed: Duration,
    pub history: Vec<IterationRecord>,
}

/// Solution returned by [`solve_nlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct NlpSolution {
    pub x: Vec<f64>,
    /// Constraint multipliers, unscaled (sign convention `∇f + Jᵀλ - z = 0`).
    pub lambda: Vec<f64>,
    pub report: SolveReport,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("starting point has {got} entries, problem has {expected} variables")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("KKT system could not be factored with correct inertia")]
    LinearSolveFailure,
    #[error("non-finite value in {0} at the starting point")]
    NonFiniteStart(&'static str),
    #[error("Newton iteration singular at iteration {0}")]
    SingularJacobian(usize),
    #[error("iteration limit reached with residual {residual:e}")]
    IterationLimit { residual: f64, x: Vec<f64> },
}

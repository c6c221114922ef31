//! Damped Newton iteration for square nonlinear systems.

use nalgebra::{DMatrix, DVector};

use super::SolverError;

/// A square system `r(x) = 0`.
pub trait SquareSystem {
    fn dim(&self) -> usize;
    fn residual(&self, x: &[f64], r: &mut [f64]);
    fn jacobian(&self, x: &[f64], jac: &mut DMatrix<f64>);
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOptions {
    /// Convergence threshold on the max-norm of the residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Smallest step fraction tried by the backtracking search.
    pub min_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-9,
            max_iter: 100,
            min_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(
        0.0f64,
        |m, x| if x.is_finite() { m.max(x.abs()) } else { f64::INFINITY },
    )
}

/// Solves `r(x) = 0` from `x0` by Newton's method with a backtracking line
/// search on `‖r‖₂`.
pub fn solve_newton<S: SquareSystem>(sys: &S, x0: &[f64], opts: &NewtonOptions) -> Result<NewtonReport, SolverError> {
    let n = sys.dim();
    if x0.len() != n {
        return Err(SolverError::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    sys.residual(&x, &mut r);
    if r.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFiniteStart("residual"));
    }
    let mut jac = DMatrix::zeros(n, n);
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; n];
    for iter in 0..opts.max_iter {
        let res = norm_inf(&r);
        if res <= opts.tol {
            return Ok(NewtonReport {
                x,
                iterations: iter,
                residual: res,
            });
        }
        sys.jacobian(&x, &mut jac);
        let lu = jac.clone().lu();
        let rhs = DVector::from_iterator(n, r.iter().map(|v| -v));
        let dx = lu.solve(&rhs).ok_or(SolverError::SingularJacobian(iter))?;
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::SingularJacobian(iter));
        }
        let phi0: f64 = r.iter().map(|v| v * v).sum();
        let mut step = 1.0;
        loop {
            for i in 0..n {
                trial[i] = x[i] + step * dx[i];
            }
            sys.residual(&trial, &mut r_trial);
            let phi: f64 = r_trial.iter().map(|v| v * v).sum();
            if phi.is_finite() && phi <= (1.0 - 1e-4 * step) * phi0 {
                break;
            }
            step *= 0.5;
            if step < opts.min_step {
                // accept the smallest step so progress is not lost entirely
                break;
            }
        }
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut r, &mut r_trial);
        if r.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::IterationLimit {
                residual: f64::INFINITY,
                x,
            });
        }
    }
    let res = norm_inf(&r);
    if res <= opts.tol {
        return Ok(NewtonReport {
            x,
            iterations: opts.max_iter,
            residual: res,
        });
    }
    Err(SolverError::IterationLimit { residual: res, x })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Circle;

    impl SquareSystem for Circle {
        fn dim(&self) -> usize {
            2
        }
        fn residual(&self, x: &[f64], r: &mut [f64]) {
            r[0] = x[0] * x[0] + x[1] * x[1] - 4.0;
            r[1] = x[0] - x[1];
        }
        fn jacobian(&self, x: &[f64], j: &mut DMatrix<f64>) {
            j[(0, 0)] = 2.0 * x[0];
            j[(0, 1)] = 2.0 * x[1];
            j[(1, 0)] = 1.0;
            j[(1, 1)] = -1.0;
        }
    }

    #[test]
    fn converges_quadratically() {
        let rep = solve_newton(&Circle, &[3.0, 1.0], &NewtonOptions::default()).unwrap();
        let s = 2f64.sqrt();
        assert!((rep.x[0] - s).abs() < 1e-10 && (rep.x[1] - s).abs() < 1e-10);
        assert!(rep.iterations < 10);
    }

    #[test]
    fn singular_start_reported() {
        let err = solve_newton(&Circle, &[0.0, 0.0], &NewtonOptions::default()).unwrap_err();
        assert_eq!(err, SolverError::SingularJacobian(0));
    }

    #[test]
    fn dimension_checked() {
        assert!(matches!(
            solve_newton(&Circle, &[1.0], &NewtonOptions::default()),
            Err(SolverError::DimensionMismatch { .. })
        ));
    }
}

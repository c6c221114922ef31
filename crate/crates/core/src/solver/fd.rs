//! Finite-difference derivative oracles, used to verify analytic Jacobians.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FdError {
    #[error("finite-difference step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("non-finite residual {row} while perturbing variable {col}")]
    NonFiniteValue { row: usize, col: usize },
}

fn perturbation(x: f64, step: f64) -> f64 {
    step * x.abs().max(1.0)
}

fn column<F>(eval: &mut F, x: &mut [f64], j: usize, h: f64) -> Result<Vec<f64>, FdError>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let xj = x[j];
    x[j] = xj + h;
    let plus = eval(x);
    x[j] = xj - h;
    let minus = eval(x);
    x[j] = xj;
    let mut col = Vec::with_capacity(plus.len());
    for (row, (p, m)) in plus.iter().zip(&minus).enumerate() {
        let d = (p - m) / (2.0 * h);
        if !d.is_finite() {
            return Err(FdError::NonFiniteValue { row, col: j });
        }
        col.push(d);
    }
    Ok(col)
}

/// Central-difference Jacobian of `eval` at `x`. Variable `j` is perturbed by
/// `step * max(|x_j|, 1)`.
pub fn fd_jacobian<F>(mut eval: F, x: &[f64], step: f64) -> Result<DMatrix<f64>, FdError>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(FdError::InvalidStep(step));
    }
    let m = eval(x).len();
    let mut jac = DMatrix::zeros(m, x.len());
    let mut xw = x.to_vec();
    for j in 0..x.len() {
        let col = column(&mut eval, &mut xw, j, perturbation(x[j], step))?;
        jac.column_mut(j).copy_from_slice(&col);
    }
    Ok(jac)
}

/// Central differences at `h, h/2, h/4, h/8` combined by Richardson
/// extrapolation. Truncation error is `O(h^8)`, so a comparatively large
/// `step` keeps roundoff negligible even where a residual's magnitude dwarfs
/// one of its partial derivatives.
pub fn fd_jacobian_extrapolated<F>(mut eval: F, x: &[f64], step: f64) -> Result<DMatrix<f64>, FdError>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    const LEVELS: usize = 4;
    if !(step > 0.0 && step.is_finite()) {
        return Err(FdError::InvalidStep(step));
    }
    let m = eval(x).len();
    let mut jac = DMatrix::zeros(m, x.len());
    let mut xw = x.to_vec();
    for j in 0..x.len() {
        let mut h = perturbation(x[j], step);
        let mut table: Vec<Vec<f64>> = Vec::with_capacity(LEVELS);
        for _ in 0..LEVELS {
            table.push(column(&mut eval, &mut xw, j, h)?);
            h *= 0.5;
        }
        // halving h removes successive even powers of h
        let mut factor = 4.0;
        for level in 1..LEVELS {
            for k in (level..LEVELS).rev() {
                for r in 0..m {
                    table[k][r] = (factor * table[k][r] - table[k - 1][r]) / (factor - 1.0);
                }
            }
            factor *= 4.0;
        }
        jac.column_mut(j).copy_from_slice(&table[LEVELS - 1]);
    }
    Ok(jac)
}

/// Largest relative discrepancy between two Jacobians. Entry `(i, j)` is
/// compared against `max(|a|, |b|, floor * max_j |a_ij|)`, so entries that
/// are tiny relative to the rest of their row are judged on the row's scale.
pub fn max_relative_error(analytic: &DMatrix<f64>, reference: &DMatrix<f64>, floor: f64) -> f64 {
    assert_eq!(analytic.shape(), reference.shape());
    let mut worst = 0.0f64;
    for i in 0..analytic.nrows() {
        let row_max = analytic.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for j in 0..analytic.ncols() {
            let (a, b) = (analytic[(i, j)], reference[(i, j)]);
            let denom = a.abs().max(b.abs()).max(floor * row_max);
            if denom > 0.0 {
                worst = worst.max((a - b).abs() / denom);
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(x: &[f64]) -> Vec<f64> {
        vec![x[0] * x[0] + 3.0 * x[0] * x[1], 2.0 * x[1] * x[1] - x[0]]
    }

    fn quadratic_jac(x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[2.0 * x[0] + 3.0 * x[1], 3.0 * x[0], -1.0, 4.0 * x[1]])
    }

    #[test]
    fn quadratic_matches_analytic() {
        let x = [1.3, -0.7];
        let fd = fd_jacobian(quadratic, &x, 1e-6).unwrap();
        assert!(max_relative_error(&quadratic_jac(&x), &fd, 0.0) < 1e-8);
        let fd = fd_jacobian_extrapolated(quadratic, &x, 1e-2).unwrap();
        assert!(max_relative_error(&quadratic_jac(&x), &fd, 0.0) < 1e-12);
    }

    #[test]
    fn extrapolation_handles_large_offsets() {
        // derivative 2e-3 * x buried under a constant of 1e5
        let f = |x: &[f64]| vec![1e5 + 1e-3 * x[0] * x[0] + (x[0] / 3.0).exp()];
        let x = [0.05];
        let exact = 2e-3 * 0.05 + (0.05f64 / 3.0).exp() / 3.0;
        let fd = fd_jacobian_extrapolated(f, &x, 1e-2).unwrap();
        assert!(((fd[(0, 0)] - exact) / exact).abs() < 1e-7);
    }

    #[test]
    fn zero_step_is_rejected() {
        assert_eq!(fd_jacobian(quadratic, &[1.0, 1.0], 0.0), Err(FdError::InvalidStep(0.0)));
        assert!(fd_jacobian_extrapolated(quadratic, &[1.0, 1.0], -1.0).is_err());
    }

    #[test]
    fn non_finite_is_reported() {
        let f = |x: &[f64]| vec![1.0 / (x[0] - 1.0)];
        assert!(matches!(
            fd_jacobian(f, &[1.0], 1e-20),
            Err(FdError::NonFiniteValue { row: 0, col: 0 })
        ));
    }
}

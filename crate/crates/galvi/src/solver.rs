//! Damped Newton method for the nonlinear stage systems.
//!
//! The Jacobian is taken by finite differences (central by default) unless
//! an analytic Jacobian is supplied; convergence is measured in the max
//! norm, matching the per-equation semantics of the discrete Euler-Lagrange
//! residuals. A backtracking line search never accepts a step that increases
//! the residual max-norm.

use nalgebra::{DMatrix, DVector};

use crate::Error;

/// Finite-difference scheme for the Jacobian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum JacobianMode {
    ForwardDifference,
    CentralDifference,
}

/// Newton iteration parameters.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct SolverSettings {
    /// Max-norm residual tolerance.
    pub residual_tol: f64,
    pub max_iterations: usize,
    pub jacobian_mode: JacobianMode,
    /// Backtracking factor applied to the step length on rejection.
    pub damping_factor: f64,
    /// Number of backtracking reductions tried before giving up.
    pub max_halvings: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            residual_tol: 1e-12,
            max_iterations: 50,
            jacobian_mode: JacobianMode::CentralDifference,
            damping_factor: 0.5,
            max_halvings: 8,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidArgument(
                "residual tolerance must be positive".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "need at least one Newton iteration".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one Newton solve.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// Max-norm of the final residual.
    pub final_residual: f64,
    /// Infinity-norm condition estimate of the last Jacobian
    /// (0 when no Jacobian was formed).
    pub jacobian_condition_estimate: f64,
}

/// Solve `residual(x) = 0` starting from `x0`, with a finite-difference
/// Jacobian per `settings.jacobian_mode`.
pub fn newton_solve<F>(
    mut residual: F,
    x0: &[f64],
    settings: &SolverSettings,
) -> Result<(Vec<f64>, SolveReport), Error>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, Error>,
{
    settings.validate()?;
    let mode = settings.jacobian_mode;
    let mut fd_jacobian = |x: &[f64], fx: &[f64], res: &mut F| -> Result<DMatrix<f64>, Error> {
        finite_difference_jacobian(res, x, fx, mode)
    };
    newton_loop(&mut residual, x0, settings, &mut fd_jacobian)
}

/// Solve with a caller-supplied (typically analytic) Jacobian. For linear
/// residuals this makes the iteration exact in one undamped step.
pub fn newton_solve_with_jacobian<F, J>(
    mut residual: F,
    mut jacobian: J,
    x0: &[f64],
    settings: &SolverSettings,
) -> Result<(Vec<f64>, SolveReport), Error>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, Error>,
    J: FnMut(&[f64]) -> Result<DMatrix<f64>, Error>,
{
    settings.validate()?;
    let mut jac = |x: &[f64], _fx: &[f64], _res: &mut F| jacobian(x);
    newton_loop(&mut residual, x0, settings, &mut jac)
}

fn newton_loop<F>(
    residual: &mut F,
    x0: &[f64],
    settings: &SolverSettings,
    jacobian: &mut dyn FnMut(&[f64], &[f64], &mut F) -> Result<DMatrix<f64>, Error>,
) -> Result<(Vec<f64>, SolveReport), Error>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, Error>,
{
    let m = x0.len();
    let mut x = x0.to_vec();
    let mut f = residual(&x)?;
    if f.len() != m {
        return Err(Error::InvalidArgument(format!(
            "residual dimension {} does not match unknown count {m}",
            f.len()
        )));
    }
    let mut res_norm = max_abs(&f);
    let mut condition = 0.0;
    if res_norm <= settings.residual_tol {
        return Ok((
            x,
            SolveReport {
                converged: true,
                iterations: 0,
                final_residual: res_norm,
                jacobian_condition_estimate: condition,
            },
        ));
    }

    for iteration in 1..=settings.max_iterations {
        let jac = jacobian(&x, &f, residual)?;
        condition = condition_estimate(&jac);
        let rhs = DVector::from_column_slice(&f);
        let Some(delta) = jac.clone().lu().solve(&rhs) else {
            return Err(Error::NonConvergence {
                report: SolveReport {
                    converged: false,
                    iterations: iteration,
                    final_residual: res_norm,
                    jacobian_condition_estimate: f64::INFINITY,
                },
            });
        };

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=settings.max_halvings {
            let trial: Vec<f64> = x
                .iter()
                .zip(delta.iter())
                .map(|(&xi, &di)| xi - alpha * di)
                .collect();
            let f_trial = residual(&trial)?;
            let trial_norm = max_abs(&f_trial);
            if trial_norm <= res_norm {
                accepted = Some((trial, f_trial, trial_norm));
                break;
            }
            alpha *= settings.damping_factor;
        }
        let Some((trial, f_trial, trial_norm)) = accepted else {
            return Err(Error::NonConvergence {
                report: SolveReport {
                    converged: false,
                    iterations: iteration,
                    final_residual: res_norm,
                    jacobian_condition_estimate: condition,
                },
            });
        };
        x = trial;
        f = f_trial;
        res_norm = trial_norm;
        if res_norm <= settings.residual_tol {
            return Ok((
                x,
                SolveReport {
                    converged: true,
                    iterations: iteration,
                    final_residual: res_norm,
                    jacobian_condition_estimate: condition,
                },
            ));
        }
    }

    Err(Error::NonConvergence {
        report: SolveReport {
            converged: false,
            iterations: settings.max_iterations,
            final_residual: res_norm,
            jacobian_condition_estimate: condition,
        },
    })
}

fn finite_difference_jacobian<F>(
    residual: &mut F,
    x: &[f64],
    fx: &[f64],
    mode: JacobianMode,
) -> Result<DMatrix<f64>, Error>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, Error>,
{
    let m = x.len();
    let step_scale = f64::EPSILON.sqrt();
    let mut jac = DMatrix::zeros(m, m);
    let mut probe = x.to_vec();
    for j in 0..m {
        let delta = step_scale * (1.0 + x[j].abs());
        match mode {
            JacobianMode::CentralDifference => {
                probe[j] = x[j] + delta;
                let f_plus = residual(&probe)?;
                probe[j] = x[j] - delta;
                let f_minus = residual(&probe)?;
                probe[j] = x[j];
                for i in 0..m {
                    jac[(i, j)] = (f_plus[i] - f_minus[i]) / (2.0 * delta);
                }
            }
            JacobianMode::ForwardDifference => {
                probe[j] = x[j] + delta;
                let f_plus = residual(&probe)?;
                probe[j] = x[j];
                for i in 0..m {
                    jac[(i, j)] = (f_plus[i] - fx[i]) / delta;
                }
            }
        }
    }
    Ok(jac)
}

/// Infinity-norm condition number via the explicit inverse; the stage
/// systems are small enough that this is cheap.
fn condition_estimate(jac: &DMatrix<f64>) -> f64 {
    match jac.clone().try_inverse() {
        Some(inv) => inf_norm(jac) * inf_norm(&inv),
        None => f64::INFINITY,
    }
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|x| x.abs()).sum())
        .fold(0.0, f64::max)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn affine_residual_converges_in_one_iteration() {
        let target = [2.5, -1.0, 0.25];
        let (x, report) = newton_solve(
            |x| Ok(x.iter().zip(&target).map(|(xi, t)| xi - t).collect()),
            &[10.0, 10.0, 10.0],
            &SolverSettings::default(),
        )
        .unwrap();
        assert_eq!(report.iterations, 1);
        assert!(report.converged);
        for (got, want) in x.iter().zip(&target) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn scalar_quadratic() {
        let (x, report) = newton_solve(
            |x| Ok(vec![x[0] * x[0] - 4.0]),
            &[3.0],
            &SolverSettings::default(),
        )
        .unwrap();
        assert!(report.iterations <= 10);
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-10);
    }

    #[test]
    fn already_converged_start_returns_zero_iterations() {
        let (x, report) = newton_solve(
            |x| Ok(vec![x[0] - 1.0]),
            &[1.0],
            &SolverSettings::default(),
        )
        .unwrap();
        assert_eq!(report.iterations, 0);
        assert_eq!(x, vec![1.0]);
    }

    #[test]
    fn reports_non_convergence_with_statistics() {
        // x^2 + 1 has no real root
        let settings = SolverSettings {
            max_iterations: 12,
            ..SolverSettings::default()
        };
        let err = newton_solve(|x| Ok(vec![x[0] * x[0] + 1.0]), &[1.0], &settings).unwrap_err();
        match err {
            Error::NonConvergence { report } => {
                assert!(!report.converged);
                assert!(report.iterations >= 1);
                assert!(report.final_residual >= 1.0);
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn damping_rejects_uphill_steps() {
        // Steep residual where the full Newton step from x0 overshoots:
        // f(x) = atan(5 x). Track every accepted iterate's residual.
        let mut norms = vec![(5.0f64 * 2.0).atan().abs()];
        let result = newton_solve(
            |x| Ok(vec![(5.0 * x[0]).atan()]),
            &[2.0],
            &SolverSettings::default(),
        );
        if let Ok((x, _)) = result {
            assert_abs_diff_eq!(x[0], 0.0, epsilon = 1e-10);
        }
        // Re-run manually to observe monotonicity of the damped iteration.
        let mut x = vec![2.0f64];
        let settings = SolverSettings::default();
        for _ in 0..20 {
            let f = vec![(5.0 * x[0]).atan()];
            if f[0].abs() <= settings.residual_tol {
                break;
            }
            let jac = finite_difference_jacobian(
                &mut |y: &[f64]| Ok(vec![(5.0 * y[0]).atan()]),
                &x,
                &f,
                JacobianMode::CentralDifference,
            )
            .unwrap();
            let delta = f[0] / jac[(0, 0)];
            let mut alpha = 1.0;
            loop {
                let trial = x[0] - alpha * delta;
                if (5.0 * trial).atan().abs() <= f[0].abs() {
                    x[0] = trial;
                    break;
                }
                alpha *= 0.5;
            }
            norms.push((5.0 * x[0]).atan().abs());
        }
        for w in norms.windows(2) {
            assert!(w[1] <= w[0], "damped residuals must not increase: {norms:?}");
        }
    }

    #[test]
    fn analytic_jacobian_hook() {
        let (x, report) = newton_solve_with_jacobian(
            |x| Ok(vec![3.0 * x[0] + 1.0]),
            |_| Ok(DMatrix::from_element(1, 1, 3.0)),
            &[7.0],
            &SolverSettings::default(),
        )
        .unwrap();
        assert_eq!(report.iterations, 1);
        assert_abs_diff_eq!(x[0], -1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(report.jacobian_condition_estimate, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn propagates_residual_evaluation_errors() {
        let err = newton_solve(
            |_| Err(Error::Singularity("boom".into())),
            &[1.0],
            &SolverSettings::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Singularity(_)));
    }
}

//! Levenberg-Marquardt on damped normal equations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::DetrendError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub max_iter: usize,
    /// Stop when the cosine between the residual and every Jacobian column
    /// drops below this.
    pub grad_tol: f64,
    /// Stop when an accepted step is smaller than `step_tol * (|p| + step_tol)`.
    pub step_tol: f64,
    pub damping_init: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-10,
            step_tol: 1e-12,
            damping_init: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ZeroResidual,
    Gradient,
    StepSize,
    MaxIterations,
    DampingOverflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub iterations: usize,
    pub final_sse: f64,
    pub converged: bool,
    pub final_damping: f64,
    pub termination: Termination,
}

/// A least-squares problem seen through its normal equations.
///
/// `normal_equations` returns `(JᵀJ, Jᵀr)` at `params` where `r` is the
/// residual vector (model minus data) and `J = ∂r/∂p`.
pub trait LeastSquaresProblem {
    fn n_params(&self) -> usize;
    fn sse(&self, params: &DVector<f64>) -> f64;
    fn normal_equations(&self, params: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>);
}

const MAX_DAMPING: f64 = 1e32;

/// Minimizes `problem.sse` from `initial`. Each iteration solves
/// `(JᵀJ + μ·diag(JᵀJ)) δ = -Jᵀr`, accepting the step and dividing `μ` by 10
/// when the SSE drops, multiplying `μ` by 10 otherwise.
pub fn levenberg_marquardt<P: LeastSquaresProblem>(
    problem: &P,
    initial: DVector<f64>,
    cfg: &LmConfig,
) -> Result<(DVector<f64>, FitReport), DetrendError> {
    if !(cfg.damping_init > 0.0) || cfg.max_iter == 0 {
        return Err(DetrendError::InvalidConfig(format!("{cfg:?}")));
    }
    let mut params = initial;
    let mut sse = problem.sse(&params);
    let mut mu = cfg.damping_init;

    let (jtj, _) = problem.normal_equations(&params);
    if jtj.clone().cholesky().is_none() || jtj.diagonal().iter().any(|d| !(*d > 0.0)) {
        return Err(DetrendError::Singular);
    }

    let report = |iterations, sse, mu, termination| FitReport {
        iterations,
        final_sse: sse,
        converged: matches!(
            termination,
            Termination::ZeroResidual | Termination::Gradient | Termination::StepSize
        ),
        final_damping: mu,
        termination,
    };

    for iter in 1..=cfg.max_iter {
        if sse == 0.0 {
            return Ok((params, report(iter - 1, sse, mu, Termination::ZeroResidual)));
        }
        let (jtj, jtr) = problem.normal_equations(&params);
        let diag = jtj.diagonal();
        let cosine = jtr
            .iter()
            .zip(diag.iter())
            .map(|(g, d)| g.abs() / (d.sqrt() * sse.sqrt()))
            .fold(0.0, f64::max);
        if cosine <= cfg.grad_tol {
            return Ok((params, report(iter - 1, sse, mu, Termination::Gradient)));
        }

        loop {
            let mut damped = jtj.clone();
            for j in 0..damped.nrows() {
                damped[(j, j)] += mu * diag[j];
            }
            let step = damped.cholesky().map(|c| c.solve(&(-&jtr)));
            let Some(delta) = step else {
                mu *= 10.0;
                if mu > MAX_DAMPING {
                    return Ok((params, report(iter, sse, mu, Termination::DampingOverflow)));
                }
                continue;
            };
            let small = delta.norm() <= cfg.step_tol * (params.norm() + cfg.step_tol);
            let trial = &params + &delta;
            let trial_sse = problem.sse(&trial);
            if trial_sse < sse {
                params = trial;
                sse = trial_sse;
                mu = (mu / 10.0).max(f64::MIN_POSITIVE);
                if small {
                    return Ok((params, report(iter, sse, mu, Termination::StepSize)));
                }
                break;
            }
            if small {
                return Ok((params, report(iter, sse, mu, Termination::StepSize)));
            }
            mu *= 10.0;
            if mu > MAX_DAMPING {
                return Ok((params, report(iter, sse, mu, Termination::DampingOverflow)));
            }
        }
    }
    Ok((params, report(cfg.max_iter, sse, mu, Termination::MaxIterations)))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rosenbrock as residuals (1 - x, 10 (y - x²)); nonlinear, minimum at (1, 1).
    struct Rosenbrock;

    impl LeastSquaresProblem for Rosenbrock {
        fn n_params(&self) -> usize {
            2
        }
        fn sse(&self, p: &DVector<f64>) -> f64 {
            let r0 = 1.0 - p[0];
            let r1 = 10.0 * (p[1] - p[0] * p[0]);
            r0 * r0 + r1 * r1
        }
        fn normal_equations(&self, p: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
            let r = DVector::from_vec(vec![1.0 - p[0], 10.0 * (p[1] - p[0] * p[0])]);
            let j = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, -20.0 * p[0], 10.0]);
            (j.transpose() * &j, j.transpose() * r)
        }
    }

    #[test]
    fn solves_a_nonlinear_problem() {
        let (p, rep) = levenberg_marquardt(
            &Rosenbrock,
            DVector::from_vec(vec![-1.2, 1.0]),
            &LmConfig::default(),
        )
        .unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!((p[0] - 1.0).abs() < 1e-8 && (p[1] - 1.0).abs() < 1e-8, "{p}");
    }

    #[test]
    fn reports_non_convergence() {
        let cfg = LmConfig {
            max_iter: 2,
            ..LmConfig::default()
        };
        let (_, rep) = levenberg_marquardt(&Rosenbrock, DVector::from_vec(vec![-1.2, 1.0]), &cfg).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.termination, Termination::MaxIterations);
    }
}

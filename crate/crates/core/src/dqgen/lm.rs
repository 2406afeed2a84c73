//! Levenberg-Marquardt for small-to-medium dense least-squares problems.
//!
//! Minimises `F(theta) = 1/2 ||r(theta)||^2` with Levenberg damping and the
//! gain-ratio update of Nielsen. The damped normal equations are solved in
//! whichever of the two equivalent forms is smaller:
//!
//! ```text
//! (J^T J + mu I) delta = -J^T r            (params <= residuals)
//! delta = -J^T (J J^T + mu I)^{-1} r       (params >  residuals)
//! ```

use nalgebra::{Cholesky, DMatrix, DVector};

/// A residual vector and its Jacobian.
pub(crate) trait LeastSquares {
    fn residual_count(&self) -> usize;
    fn param_count(&self) -> usize;
    /// Writes `r(theta)` into `out`; when `jacobian` is given, also writes
    /// `dr/dtheta` (residuals by params).
    fn evaluate(&self, params: &[f64], out: &mut [f64], jacobian: Option<&mut DMatrix<f64>>);
}

#[derive(Clone, Debug)]
pub(crate) struct LmConfig {
    pub tolerance: f64,
    pub min_step: f64,
    pub max_iterations: usize,
    pub initial_damping: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Termination {
    Converged,
    SmallStep,
    MaxIterations,
    NonFinite,
    DampingOverflow,
}

#[derive(Clone, Debug)]
pub(crate) struct LmReport {
    pub params: Vec<f64>,
    pub residual_norm: f64,
    pub termination: Termination,
}

pub(crate) fn minimize(problem: &impl LeastSquares, start: Vec<f64>, cfg: &LmConfig) -> LmReport {
    let m = problem.residual_count();
    let p = problem.param_count();
    let mut params = start;
    let mut trial = vec![0.0; p];
    let mut r = vec![0.0; m];
    let mut r_trial = vec![0.0; m];
    let mut jac = DMatrix::<f64>::zeros(m, p);

    problem.evaluate(&params, &mut r, Some(&mut jac));
    let mut norm = l2(&r);
    if !norm.is_finite() {
        return LmReport {
            params,
            residual_norm: norm,
            termination: Termination::NonFinite,
        };
    }

    let mut mu = -1.0;
    let mut nu = 2.0;
    let mut iterations = 0;
    let mut fresh_jacobian = true;
    let mut gram = DMatrix::<f64>::zeros(0, 0);
    let mut grad = DVector::<f64>::zeros(p);

    loop {
        if norm <= cfg.tolerance {
            return report(params, norm, Termination::Converged);
        }
        if iterations >= cfg.max_iterations {
            return report(params, norm, Termination::MaxIterations);
        }
        iterations += 1;

        if fresh_jacobian {
            let rv = DVector::from_column_slice(&r);
            grad = jac.tr_mul(&rv);
            gram = if p <= m { jac.tr_mul(&jac) } else { &jac * jac.transpose() };
            if mu < 0.0 {
                let max_diag = (0..p).map(|c| jac.column(c).norm_squared()).fold(0.0, f64::max);
                mu = cfg.initial_damping * max_diag.max(1e-12);
            }
            fresh_jacobian = false;
        }

        let Some(step) = damped_step(&jac, &gram, &grad, &r, mu, p <= m) else {
            mu *= nu;
            nu *= 2.0;
            if !mu.is_finite() || mu > 1e300 {
                return report(params, norm, Termination::DampingOverflow);
            }
            continue;
        };

        let step_norm = step.norm();
        if step_norm < cfg.min_step {
            return report(params, norm, Termination::SmallStep);
        }

        for ((t, x), s) in trial.iter_mut().zip(&params).zip(step.iter()) {
            *t = x + s;
        }
        problem.evaluate(&trial, &mut r_trial, None);
        let trial_norm = l2(&r_trial);
        if !trial_norm.is_finite() {
            return report(params, norm, Termination::NonFinite);
        }

        // predicted reduction of 1/2 ||r||^2 is 1/2 step^T (mu step - grad)
        let predicted = 0.5 * (mu * step.norm_squared() - step.dot(&grad));
        let actual = 0.5 * (norm * norm - trial_norm * trial_norm);
        let rho = if predicted > 0.0 { actual / predicted } else { -1.0 };

        if rho > 0.0 {
            std::mem::swap(&mut params, &mut trial);
            problem.evaluate(&params, &mut r, Some(&mut jac));
            norm = l2(&r);
            fresh_jacobian = true;
            mu *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
            nu = 2.0;
        } else {
            mu *= nu;
            nu *= 2.0;
            if !mu.is_finite() || mu > 1e300 {
                return report(params, norm, Termination::DampingOverflow);
            }
        }
    }
}

fn damped_step(
    jac: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    grad: &DVector<f64>,
    r: &[f64],
    mu: f64,
    param_space: bool,
) -> Option<DVector<f64>> {
    let mut a = gram.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += mu;
    }
    let chol = Cholesky::new(a)?;
    if param_space {
        Some(-chol.solve(grad))
    } else {
        let u = chol.solve(&DVector::from_column_slice(r));
        Some(-jac.tr_mul(&u))
    }
}

fn report(params: Vec<f64>, residual_norm: f64, termination: Termination) -> LmReport {
    LmReport {
        params,
        residual_norm,
        termination,
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

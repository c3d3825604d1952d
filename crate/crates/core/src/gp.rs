//! Gradient projection with the Armijo rule along the projection arc, for the
//! single-variable problem `min F(X)` over a convex constraint set.
//!
//! Trial points are `X(α) = P(X − α∇F(X))` with `α = α₀ βᵐ`; the first `m`
//! with `F(X) − F(X(α)) ≥ σ ⟨∇F(X), X − X(α)⟩` is accepted. Each trial costs
//! one projection, which is what [`projection_count`] reports.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::linalg::frob_dot;
use crate::objective::{ensure_symmetric_data, full_gradient, full_objective, ProblemSpec};
use crate::palm::ridge_start;
use crate::proximal::Constraint;
use crate::report::{GpRecord, SolveReport, SolveStatus, SolverTrace};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    pub armijo_sigma: f64,
    pub armijo_beta: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
    pub max_iters: usize,
    /// Convergence threshold on `‖X^{k+1} − X^k‖_F`.
    pub tol_step: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            armijo_sigma: 0.1,
            armijo_beta: 0.5,
            initial_step: 1.0,
            max_backtracks: 50,
            max_iters: 5000,
            tol_step: 1e-5,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        if !in_unit(self.armijo_sigma) || !in_unit(self.armijo_beta) || !(self.initial_step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need armijo_sigma, armijo_beta in (0,1) and initial_step > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Total projections performed by a solve, backtracking trials included.
pub fn projection_count(report: &SolveReport) -> usize {
    report.projections
}

/// Projected gradient descent on `F` over an ℓ1 or nuclear-norm ball.
/// Nonconvex constraints are rejected. Without `init` the start is the
/// projection of the ridge least-squares solution.
pub fn gp_solve(spec: &ProblemSpec, constraint: &Constraint, init: Option<Matrix>, config: &GpConfig) -> Result<SolveReport> {
    let started = Instant::now();
    config.validate()?;
    let p = spec.p();
    constraint.validate(p)?;
    if !constraint.is_convex() {
        return Err(Error::InvalidArgument(format!(
            "gradient projection needs a convex constraint, got {}",
            constraint.name()
        )));
    }
    ensure_symmetric_data(spec)?;

    let mut projections = 0;
    let mut x = match init {
        Some(x0) => {
            if x0.shape() != (p, p) {
                return Err(Error::Dimension(format!("initial iterate must be {p}×{p}")));
            }
            x0
        }
        None => ridge_start(spec),
    };
    if !constraint.is_feasible(&x) {
        x = constraint.project(&x);
        projections += 1;
    }
    let mut fx = full_objective(spec, &x);
    if !fx.is_finite() {
        return Err(Error::NonFinite { iter: 0 });
    }

    let mut trace = vec![GpRecord { iter: 0, f_value: fx, step_size: 0.0, backtracks: 0, projections_cum: projections }];
    let mut status = SolveStatus::MaxIters;
    let mut iterations = 0;
    let mut last_step = 0.0;

    'outer: for k in 0..config.max_iters {
        let grad = full_gradient(spec, &x);
        let mut alpha = config.initial_step;
        let mut backtracks = 0;
        let (x_next, f_next) = loop {
            let trial = constraint.project(&(&x - &grad * alpha));
            projections += 1;
            let f_trial = full_objective(spec, &trial);
            let decrease = fx - f_trial;
            let predicted = frob_dot(&grad, &(&x - &trial));
            if f_trial.is_finite() && decrease >= config.armijo_sigma * predicted {
                break (trial, f_trial);
            }
            backtracks += 1;
            if backtracks > config.max_backtracks {
                log::warn!(
                    "Armijo backtracking exhausted at iterate {k} (step {alpha:e}); the problem is likely badly scaled"
                );
                status = SolveStatus::BacktrackingExhausted;
                break 'outer;
            }
            alpha *= config.armijo_beta;
        };
        last_step = (&x_next - &x).norm();
        x = x_next;
        fx = f_next;
        iterations = k + 1;
        let converged = last_step <= config.tol_step;
        trace.push(GpRecord { iter: k + 1, f_value: fx, step_size: alpha, backtracks, projections_cum: projections });
        if converged {
            status = SolveStatus::Converged;
            break;
        }
    }

    Ok(SolveReport {
        estimate: x.clone(),
        x_block: x,
        status,
        iterations,
        final_objective: fx,
        e_x: last_step,
        e_y: last_step,
        e_xy: 0.0,
        trace: SolverTrace::Gp(trace),
        delta_min: None,
        violation: None,
        projections,
        wall_time: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> ProblemSpec {
        let p = 2;
        let c = Matrix::from_row_slice(p, 3, &[1.0, 0.5, -0.2, 0.3, -1.0, 0.8]);
        let d = Matrix::from_row_slice(p, 3, &[0.4, 0.1, 0.2, -0.3, 0.6, -0.1]);
        let s = Matrix::from_row_slice(p, p, &[1.2, 0.1, 0.1, 0.9]);
        ProblemSpec::new(c, d, s, Matrix::identity(p, p) * 0.5, 0.3, 1.0, 0.0).unwrap()
    }

    #[test]
    fn rejects_nonconvex_constraints() {
        let spec = tiny_spec();
        assert!(gp_solve(&spec, &Constraint::Cardinality(2), None, &GpConfig::default()).is_err());
        assert!(gp_solve(&spec, &Constraint::Rank(1), None, &GpConfig::default()).is_err());
    }

    #[test]
    fn stationary_start_stops_at_first_check() {
        let p = 2;
        let s = Matrix::identity(p, p);
        let spec = ProblemSpec::new(Matrix::zeros(p, 3), Matrix::zeros(p, 3), s.clone(), s, 1.0, 1.0, 0.0).unwrap();
        let r = gp_solve(&spec, &Constraint::L1Ball(1.0), Some(Matrix::zeros(p, p)), &GpConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(projection_count(&r), 1);
    }

    #[test]
    fn objective_is_nonincreasing() {
        let spec = tiny_spec();
        let r = gp_solve(&spec, &Constraint::L1Ball(0.5), None, &GpConfig::default()).unwrap();
        let SolverTrace::Gp(rows) = &r.trace else { panic!("gp trace expected") };
        for w in rows.windows(2) {
            assert!(w[1].f_value <= w[0].f_value);
        }
        assert!(crate::linalg::l1_norm(&r.estimate) <= 0.5 + 1e-12);
    }
}

//! Proximal alternating linearized minimization for the split problem
//! `min Φ(X, Y) = f(X) + g(Y) + H(X, Y)`.
//!
//! Each iteration takes a proximal-gradient step on each block with step
//! coefficients `c_k = γ₁ L₁(Y^k)` and `d_k = γ₂ L₂(X^{k+1})`:
//!
//! ```text
//! U^k     = X^k − ∇_X H(X^k, Y^k) / c_k
//! X^{k+1} = argmin_X f(X) + (c_k/2)‖X − U^k‖²
//! V^k     = Y^k − ∇_Y H(X^{k+1}, Y^k) / d_k
//! Y^{k+1} = proj_constraint(V^k)
//! ```
//!
//! With `γ₁, γ₂ > 1` every step decreases `Φ` by at least
//! `(δ/2)‖Z^{k+1} − Z^k‖²`, `δ = min{(γ₁−1) inf L₁, (γ₂−1) inf L₂}`; the
//! solver checks this at runtime.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::objective::{f_value, h_value, x_block, y_block, ProblemSpec};
use crate::proximal::{Constraint, XUpdate};
use crate::report::{IterateState, SolveReport, SolveStatus, SolverTrace};
use crate::{Error, Matrix, Result};

/// Every iterate is recorded up to this index, then every tenth.
const DENSE_TRACE_LIMIT: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PalmConfig {
    pub gamma1: f64,
    pub gamma2: f64,
    pub max_iters: usize,
    /// Convergence threshold on `max(e_X, e_Y)`.
    pub tol_step: f64,
    /// Reported target for `e_XY`; not used to stop.
    pub tol_couple: f64,
    /// Stop with [`SolveStatus::MonotonicityViolation`] when `Φ` fails the
    /// sufficient-decrease check.
    pub assert_monotone: bool,
    /// Relative slack of the decrease check, `slack · (1 + |Φ|)`.
    pub monotone_slack: f64,
    /// Re-verify `g(Y^k) = 0` at every iterate (costly for rank constraints).
    pub check_feasibility: bool,
}

impl Default for PalmConfig {
    fn default() -> Self {
        Self {
            gamma1: 2.0,
            gamma2: 2.0,
            max_iters: 5000,
            tol_step: 1e-5,
            tol_couple: 1e-3,
            assert_monotone: true,
            monotone_slack: 1e-9,
            check_feasibility: false,
        }
    }
}

impl PalmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma1 > 1.0 && self.gamma2 > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma1 and gamma2 must exceed 1, got {} and {}",
                self.gamma1, self.gamma2
            )));
        }
        if !(self.tol_step >= 0.0) || !(self.monotone_slack >= 0.0) {
            return Err(Error::InvalidArgument("tolerances must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Margin `Φ(Z^k) − Φ(Z^{k+1}) − (δ/2)‖Z^{k+1} − Z^k‖²` with
/// `δ = min{(γ₁−1) q₁⁻, (γ₂−1) q₂⁻}`. Nonnegative for every PALM step.
pub fn sufficient_decrease_margin(
    prev: &IterateState,
    next: &IterateState,
    q1_minus: f64,
    q2_minus: f64,
    config: &PalmConfig,
) -> f64 {
    let delta = ((config.gamma1 - 1.0) * q1_minus).min((config.gamma2 - 1.0) * q2_minus);
    let step_sq = next.e_x * next.e_x + next.e_y * next.e_y;
    (prev.phi - next.phi) - 0.5 * delta * step_sq
}

/// Ridge least-squares start `X⁰ = DCᵀ(CCᵀ + εI)⁻¹` with
/// `ε = 1e-6 · tr(CCᵀ)/p`, and `Y⁰` its projection.
pub fn default_init(spec: &ProblemSpec, constraint: &Constraint) -> (Matrix, Matrix) {
    let x0 = ridge_start(spec);
    let y0 = constraint.project(&x0);
    (x0, y0)
}

pub(crate) fn ridge_start(spec: &ProblemSpec) -> Matrix {
    let p = spec.p();
    let c = spec.c();
    let trace: f64 = c.iter().map(|v| v * v).sum();
    let eps = 1e-6 * trace / p as f64;
    if eps == 0.0 {
        return Matrix::zeros(p, p);
    }
    // push-through identity: DCᵀ(CCᵀ + εI)⁻¹ = D(CᵀC + εI)⁻¹Cᵀ
    let x0 = if p <= c.ncols() {
        let mut g = c * c.transpose();
        for i in 0..p {
            g[(i, i)] += eps;
        }
        let chol = g.cholesky().expect("regularized Gram matrix is positive definite");
        chol.solve(&(c * spec.d().transpose())).transpose()
    } else {
        let mut g = c.tr_mul(c);
        for i in 0..g.nrows() {
            g[(i, i)] += eps;
        }
        let chol = g.cholesky().expect("regularized Gram matrix is positive definite");
        // D (CᵀC + εI)⁻¹ Cᵀ
        chol.solve(&spec.d().transpose()).transpose() * c.transpose()
    };
    x0
}

fn phi(spec: &ProblemSpec, x: &Matrix, y: &Matrix) -> f64 {
    f_value(spec, x) + h_value(spec, x, y)
}

/// Runs PALM from `init` (or [`default_init`]) until
/// `max(e_X, e_Y) ≤ tol_step` or `max_iters` updates.
///
/// Returns an error only for non-finite iterates; a failed decrease check is
/// reported through the status with the offending step attached.
pub fn palm_solve(
    spec: &ProblemSpec,
    constraint: &Constraint,
    init: Option<(Matrix, Matrix)>,
    config: &PalmConfig,
) -> Result<SolveReport> {
    let started = Instant::now();
    config.validate()?;
    let p = spec.p();
    constraint.validate(p)?;

    let mut projections = 0;
    let (mut x, mut y) = match init {
        Some((x0, y0)) => {
            if x0.shape() != (p, p) || y0.shape() != (p, p) {
                return Err(Error::Dimension(format!("initial iterates must be {p}×{p}")));
            }
            (x0, y0)
        }
        None => {
            projections += 1;
            default_init(spec, constraint)
        }
    };
    if !constraint.is_feasible(&y) {
        return Err(Error::InvalidArgument("initial Y is infeasible for the constraint".into()));
    }

    let x_update = XUpdate::new(spec);
    let mut current = IterateState {
        iter: 0,
        phi: phi(spec, &x, &y),
        e_x: 0.0,
        e_y: 0.0,
        e_xy: (&x - &y).norm(),
        c_k: f64::NAN,
        d_k: f64::NAN,
    };
    if !current.phi.is_finite() {
        return Err(Error::NonFinite { iter: 0 });
    }
    let mut trace = vec![current];
    let mut q1_min = f64::INFINITY;
    let mut q2_min = f64::INFINITY;
    let mut delta_min = f64::INFINITY;
    let mut status = SolveStatus::MaxIters;
    let mut violation = None;
    let mut iterations = 0;

    for k in 0..config.max_iters {
        let xb = x_block(spec, &x, &y);
        let ck = config.gamma1 * xb.lipschitz;
        let u = &x - xb.grad / ck;
        let x_next = x_update.apply(&u, ck);

        let yb = y_block(spec, &x_next, &y);
        let dk = config.gamma2 * yb.lipschitz;
        let v = &y - yb.grad / dk;
        let y_next = constraint.project(&v);
        projections += 1;

        let next = IterateState {
            iter: k + 1,
            phi: phi(spec, &x_next, &y_next),
            e_x: (&x_next - &x).norm(),
            e_y: (&y_next - &y).norm(),
            e_xy: (&x_next - &y_next).norm(),
            c_k: ck,
            d_k: dk,
        };
        if !next.phi.is_finite() || !ck.is_finite() || !dk.is_finite() {
            return Err(Error::NonFinite { iter: k + 1 });
        }
        if config.check_feasibility && !constraint.is_feasible(&y_next) {
            return Err(Error::Numerical(format!("Y left the constraint set at iterate {}", k + 1)));
        }

        q1_min = q1_min.min(xb.lipschitz);
        q2_min = q2_min.min(yb.lipschitz);
        let margin = sufficient_decrease_margin(&current, &next, q1_min, q2_min, config);
        delta_min = delta_min.min(margin);

        x = x_next;
        y = y_next;
        iterations = k + 1;
        let converged = next.e_x.max(next.e_y) <= config.tol_step;
        let last = converged || k + 1 == config.max_iters;
        if k < DENSE_TRACE_LIMIT || (k + 1) % 10 == 0 || last {
            trace.push(next);
        }

        if config.assert_monotone && margin < -config.monotone_slack * (1.0 + current.phi.abs()) {
            if !trace.last().is_some_and(|r| r.iter == next.iter) {
                trace.push(next);
            }
            status = SolveStatus::MonotonicityViolation;
            violation = Some(next);
            current = next;
            break;
        }
        current = next;
        if converged {
            status = SolveStatus::Converged;
            break;
        }
    }

    Ok(SolveReport {
        e_x: current.e_x,
        e_y: current.e_y,
        e_xy: current.e_xy,
        final_objective: current.phi,
        estimate: y,
        x_block: x,
        status,
        iterations,
        trace: SolverTrace::Palm(trace),
        delta_min: delta_min.is_finite().then_some(delta_min),
        violation,
        projections,
        wall_time: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_problem_converges_immediately() {
        let p = 3;
        let s = Matrix::identity(p, p);
        let spec = ProblemSpec::new(Matrix::zeros(p, 4), Matrix::zeros(p, 4), s.clone(), s, 1.0, 1.0, 0.0).unwrap();
        let z = Matrix::zeros(p, p);
        let report = palm_solve(&spec, &Constraint::Cardinality(2), Some((z.clone(), z.clone())), &PalmConfig::default())
            .unwrap();
        assert_eq!(report.status, SolveStatus::Converged);
        assert_eq!(report.iterations, 1);
        assert_eq!(report.estimate, z);
        assert_eq!(report.final_objective, 0.0);
    }

    #[test]
    fn stationary_margin_is_zero() {
        let s = IterateState { iter: 3, phi: 1.5, e_x: 0.0, e_y: 0.0, e_xy: 0.1, c_k: 2.0, d_k: 2.0 };
        let next = IterateState { iter: 4, ..s };
        assert_eq!(sufficient_decrease_margin(&s, &next, 1.0, 1.0, &PalmConfig::default()), 0.0);
    }

    #[test]
    fn rejects_gamma_at_most_one() {
        let cfg = PalmConfig { gamma1: 1.0, ..PalmConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_infeasible_start() {
        let p = 2;
        let s = Matrix::identity(p, p);
        let spec = ProblemSpec::new(Matrix::zeros(p, 2), Matrix::zeros(p, 2), s.clone(), s, 1.0, 1.0, 0.0).unwrap();
        let y = Matrix::from_element(p, p, 1.0);
        let r = palm_solve(&spec, &Constraint::Cardinality(1), Some((y.clone(), y)), &PalmConfig::default());
        assert!(r.is_err());
    }

    #[test]
    fn config_json_rejects_unknown_keys() {
        assert!(serde_json::from_str::<PalmConfig>(r#"{"gamma1": 3.0}"#).is_ok());
        assert!(serde_json::from_str::<PalmConfig>(r#"{"gama1": 3.0}"#).is_err());
    }
}

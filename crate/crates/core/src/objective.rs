//! Objective pieces of the Lyapunov-penalized estimation problem.
//!
//! Two formulations share one [`ProblemSpec`]:
//!
//! * the split form used by PALM,
//!   `Φ(X, Y) = f(X) + g(Y) + H(X, Y)` with
//!   `f(X) = ½‖XC − D‖²`,
//!   `H(X, Y) = ρ₁/2 ‖Y S Xᵀ + Q − S‖² + ρ₂/2 ‖X − Y‖² + μ/2 ‖Y Xᵀ‖²`
//!   and `g` the indicator of the constraint set;
//! * the single-variable form used by gradient projection,
//!   `F(X) = ½‖XC − D‖² + ρ₁/2 ‖X S Xᵀ + Q − S‖² + μ/2 ‖X Xᵀ‖²`.
//!
//! All norms are Frobenius.

use crate::linalg::is_symmetric;
use crate::proximal::Constraint;
use crate::{Error, Matrix, Result};

/// Fixed data of one estimation problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    c: Matrix,
    d: Matrix,
    s_cov: Matrix,
    q: Matrix,
    rho1: f64,
    rho2: f64,
    mu: f64,
    // Q − S, used by every gradient evaluation
    q_minus_s: Matrix,
}

impl ProblemSpec {
    pub fn new(c: Matrix, d: Matrix, s_cov: Matrix, q: Matrix, rho1: f64, rho2: f64, mu: f64) -> Result<Self> {
        let p = s_cov.nrows();
        if c.shape() != d.shape() {
            return Err(Error::Dimension(format!("C is {:?} but D is {:?}", c.shape(), d.shape())));
        }
        if c.nrows() != p || !s_cov.is_square() || q.shape() != s_cov.shape() {
            return Err(Error::Dimension(format!(
                "C is {:?}, S is {:?}, Q is {:?}",
                c.shape(),
                s_cov.shape(),
                q.shape()
            )));
        }
        if !is_symmetric(&s_cov, 1e-12) {
            return Err(Error::NotSymmetric("sample covariance S".into()));
        }
        if !is_symmetric(&q, 1e-12) {
            return Err(Error::NotSymmetric("noise covariance Q".into()));
        }
        if !(rho1 > 0.0) || !(rho2 > 0.0) || !(mu >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need rho1 > 0, rho2 > 0, mu ≥ 0; got rho1={rho1}, rho2={rho2}, mu={mu}"
            )));
        }
        let q_minus_s = &q - &s_cov;
        Ok(Self { c, d, s_cov, q, rho1, rho2, mu, q_minus_s })
    }

    /// Builds a problem from a training series and a sample covariance with
    /// `Q = σ² I`. When `rho2` is `None` it defaults to `ρ₁ ‖S‖²`.
    pub fn from_series(
        train: &crate::TimeSeriesData,
        s_cov: Matrix,
        sigma: f64,
        rho1: f64,
        rho2: Option<f64>,
        mu: f64,
    ) -> Result<Self> {
        let p = train.p();
        let q = Matrix::identity(p, p) * (sigma * sigma);
        let rho2 = rho2.unwrap_or_else(|| default_rho2(rho1, &s_cov));
        Self::new(train.lagged(), train.led(), s_cov, q, rho1, rho2, mu)
    }

    /// Copy with a different Lyapunov weight (the other fields unchanged).
    pub fn with_rho1(&self, rho1: f64) -> Result<Self> {
        Self::new(self.c.clone(), self.d.clone(), self.s_cov.clone(), self.q.clone(), rho1, self.rho2, self.mu)
    }

    pub fn p(&self) -> usize {
        self.s_cov.nrows()
    }

    /// Number of transitions, `n − 1`.
    pub fn transitions(&self) -> usize {
        self.c.ncols()
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn d(&self) -> &Matrix {
        &self.d
    }

    pub fn s_cov(&self) -> &Matrix {
        &self.s_cov
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn rho1(&self) -> f64 {
        self.rho1
    }

    pub fn rho2(&self) -> f64 {
        self.rho2
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub(crate) fn q_minus_s(&self) -> &Matrix {
        &self.q_minus_s
    }

    fn check_square(&self, name: &str, m: &Matrix) {
        let p = self.p();
        assert_eq!(m.shape(), (p, p), "{name} must be {p}×{p}");
    }
}

/// `ρ₁ ‖S‖_F²`, which puts the coupling weight on the scale of the Lyapunov
/// term's curvature.
pub fn default_rho2(rho1: f64, s_cov: &Matrix) -> f64 {
    let s2 = s_cov.norm_squared();
    if s2 > 0.0 {
        rho1 * s2
    } else {
        rho1
    }
}

/// `½‖XC − D‖²`.
pub fn f_value(spec: &ProblemSpec, x: &Matrix) -> f64 {
    spec.check_square("X", x);
    0.5 * (x * spec.c() - spec.d()).norm_squared()
}

/// Coupling function `H(X, Y)`.
pub fn h_value(spec: &ProblemSpec, x: &Matrix, y: &Matrix) -> f64 {
    spec.check_square("X", x);
    spec.check_square("Y", y);
    let yxt = y * x.transpose();
    let lyap = (y * spec.s_cov() * x.transpose() + spec.q_minus_s()).norm_squared();
    let couple = (x - y).norm_squared();
    let stab = if spec.mu() > 0.0 { yxt.norm_squared() } else { 0.0 };
    0.5 * (spec.rho1() * lyap + spec.rho2() * couple + spec.mu() * stab)
}

/// `Φ(X, Y) = f(X) + H(X, Y) + g(Y)`, infinite when `Y` is infeasible.
pub fn phi_value(spec: &ProblemSpec, constraint: &Constraint, x: &Matrix, y: &Matrix) -> f64 {
    if !constraint.is_feasible(y) {
        return f64::INFINITY;
    }
    f_value(spec, x) + h_value(spec, x, y)
}

/// Quantities shared by `∇_X H` and `L₁`: `M₁ = ρ₁ SᵀYᵀYS + μ YᵀY + ρ₂ I`.
pub(crate) struct XBlock {
    pub grad: Matrix,
    pub lipschitz: f64,
}

pub(crate) fn x_block(spec: &ProblemSpec, x: &Matrix, y: &Matrix) -> XBlock {
    let p = spec.p();
    let ys = y * spec.s_cov();
    let mut m1 = ys.tr_mul(&ys) * spec.rho1();
    if spec.mu() > 0.0 {
        m1 += y.tr_mul(y) * spec.mu();
    }
    for i in 0..p {
        m1[(i, i)] += spec.rho2();
    }
    // ρ₁(X SᵀYᵀYS + (Q−S)ᵀYS) + ρ₂(X − Y) + μ X YᵀY = X M₁ + ρ₁(Q−S)ᵀYS − ρ₂Y
    let mut grad = x * &m1;
    grad += spec.q_minus_s().tr_mul(&ys) * spec.rho1();
    grad -= y * spec.rho2();
    XBlock { lipschitz: m1.norm(), grad }
}

/// `M₂ = ρ₁ S XᵀX Sᵀ + μ XᵀX + ρ₂ I`, shared by `∇_Y H` and `L₂`.
pub(crate) fn y_block(spec: &ProblemSpec, x: &Matrix, y: &Matrix) -> XBlock {
    let p = spec.p();
    // X Sᵀ; S is symmetric by construction
    let xst = x * spec.s_cov().transpose();
    let mut m2 = xst.tr_mul(&xst) * spec.rho1();
    if spec.mu() > 0.0 {
        m2 += x.tr_mul(x) * spec.mu();
    }
    for i in 0..p {
        m2[(i, i)] += spec.rho2();
    }
    // ρ₁(Y S XᵀX Sᵀ + (Q−S) X Sᵀ) + ρ₂(Y − X) + μ Y XᵀX = Y M₂ + ρ₁(Q−S)XSᵀ − ρ₂X
    let mut grad = y * &m2;
    grad += spec.q_minus_s() * &xst * spec.rho1();
    grad -= x * spec.rho2();
    XBlock { lipschitz: m2.norm(), grad }
}

/// `∇_X H(X, Y)`.
pub fn grad_x_h(spec: &ProblemSpec, x: &Matrix, y: &Matrix) -> Matrix {
    spec.check_square("X", x);
    spec.check_square("Y", y);
    x_block(spec, x, y).grad
}

/// `∇_Y H(X, Y)`.
pub fn grad_y_h(spec: &ProblemSpec, x: &Matrix, y: &Matrix) -> Matrix {
    spec.check_square("X", x);
    spec.check_square("Y", y);
    y_block(spec, x, y).grad
}

/// `L₁(Y) = ‖ρ₁ SᵀYᵀYS + μ YᵀY + ρ₂ I‖_F`, a Lipschitz constant of
/// `X ↦ ∇_X H(X, Y)`.
pub fn lipschitz_x(spec: &ProblemSpec, y: &Matrix) -> f64 {
    spec.check_square("Y", y);
    let zero = Matrix::zeros(spec.p(), spec.p());
    x_block(spec, &zero, y).lipschitz
}

/// `L₂(X) = ‖ρ₁ S XᵀX Sᵀ + μ XᵀX + ρ₂ I‖_F`.
pub fn lipschitz_y(spec: &ProblemSpec, x: &Matrix) -> f64 {
    spec.check_square("X", x);
    let zero = Matrix::zeros(spec.p(), spec.p());
    y_block(spec, x, &zero).lipschitz
}

/// Single-variable objective `F(X)`.
pub fn full_objective(spec: &ProblemSpec, x: &Matrix) -> f64 {
    spec.check_square("X", x);
    let r = x * spec.s_cov() * x.transpose() + spec.q_minus_s();
    let mut value = f_value(spec, x) + 0.5 * spec.rho1() * r.norm_squared();
    if spec.mu() > 0.0 {
        value += 0.5 * spec.mu() * (x * x.transpose()).norm_squared();
    }
    value
}

/// `∇F(X) = (XC − D)Cᵀ + 2ρ₁ R X S + 2μ (XXᵀ)X` with `R = X S Xᵀ + Q − S`.
///
/// The closed form relies on `S` and `Q` being symmetric, which
/// [`ProblemSpec::new`] enforces.
pub fn full_gradient(spec: &ProblemSpec, x: &Matrix) -> Matrix {
    spec.check_square("X", x);
    let xs = x * spec.s_cov();
    let r = &xs * x.transpose() + spec.q_minus_s();
    let mut grad = (x * spec.c() - spec.d()) * spec.c().transpose();
    grad += r * xs * (2.0 * spec.rho1());
    if spec.mu() > 0.0 {
        grad += x * x.transpose() * x * (2.0 * spec.mu());
    }
    grad
}

/// Validates that a problem can be handled by the single-variable routines.
pub(crate) fn ensure_symmetric_data(spec: &ProblemSpec) -> Result<()> {
    if !is_symmetric(spec.s_cov(), 1e-12) || !is_symmetric(spec.q(), 1e-12) {
        return Err(Error::NotSymmetric("single-variable gradient requires symmetric S and Q".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_with(c: Matrix, d: Matrix, s: Matrix, q: Matrix, mu: f64) -> ProblemSpec {
        ProblemSpec::new(c, d, s, q, 1.5, 0.7, mu).unwrap()
    }

    #[test]
    fn zero_cases() {
        let p = 3;
        let s = Matrix::identity(p, p) * 2.0;
        let spec = spec_with(Matrix::zeros(p, 4), Matrix::zeros(p, 4), s.clone(), s, 0.0);
        let z = Matrix::zeros(p, p);
        assert_eq!(f_value(&spec, &z), 0.0);
        assert_eq!(h_value(&spec, &z, &z), 0.0);
        assert_eq!(grad_x_h(&spec, &z, &z), z);
        assert_eq!(grad_y_h(&spec, &z, &z), z);
        assert_eq!(full_objective(&spec, &z), 0.0);
        assert_eq!(full_gradient(&spec, &z), z);
    }

    #[test]
    fn exact_fit_has_zero_least_squares() {
        let d = Matrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64 - 4.0);
        let spec = spec_with(Matrix::identity(3, 3), d.clone(), Matrix::identity(3, 3), Matrix::identity(3, 3), 0.0);
        assert_eq!(f_value(&spec, &d), 0.0);
    }

    #[test]
    fn identity_covariances_reduce_lyapunov_term() {
        let p = 3;
        let id = Matrix::identity(p, p);
        let spec = spec_with(Matrix::zeros(p, 2), Matrix::zeros(p, 2), id.clone(), id, 0.0);
        let x = Matrix::from_fn(p, p, |i, j| 0.1 * (i as f64) - 0.2 * (j as f64) + 0.05);
        let expected = 0.5 * spec.rho1() * (&x * x.transpose()).norm_squared();
        assert!((h_value(&spec, &x, &x) - expected).abs() < 1e-14);
    }

    #[test]
    fn single_block_gradients() {
        let p = 3;
        let s = Matrix::from_row_slice(p, p, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 1.5]);
        let spec = spec_with(Matrix::zeros(p, 2), Matrix::zeros(p, 2), s, Matrix::identity(p, p), 0.0);
        let x = Matrix::from_fn(p, p, |i, j| (i + 2 * j) as f64 * 0.1);
        let z = Matrix::zeros(p, p);
        assert_eq!(grad_x_h(&spec, &x, &z), &x * spec.rho2());
        assert_eq!(grad_y_h(&spec, &z, &x), &x * spec.rho2());
    }

    #[test]
    fn lipschitz_floor() {
        let p = 4;
        let spec = spec_with(
            Matrix::zeros(p, 2),
            Matrix::zeros(p, 2),
            Matrix::identity(p, p),
            Matrix::identity(p, p),
            0.0,
        );
        let z = Matrix::zeros(p, p);
        let expected = spec.rho2() * (p as f64).sqrt();
        assert!((lipschitz_x(&spec, &z) - expected).abs() < 1e-14);
        assert!((lipschitz_y(&spec, &z) - expected).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_weights_and_asymmetry() {
        let p = 2;
        let id = Matrix::identity(p, p);
        let c = Matrix::zeros(p, 3);
        assert!(ProblemSpec::new(c.clone(), c.clone(), id.clone(), id.clone(), 0.0, 1.0, 0.0).is_err());
        assert!(ProblemSpec::new(c.clone(), c.clone(), id.clone(), id.clone(), 1.0, -1.0, 0.0).is_err());
        assert!(ProblemSpec::new(c.clone(), c.clone(), id.clone(), id.clone(), 1.0, 1.0, -0.1).is_err());
        let asym = Matrix::from_row_slice(p, p, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            ProblemSpec::new(c.clone(), c.clone(), asym, id.clone(), 1.0, 1.0, 0.0),
            Err(Error::NotSymmetric(_))
        ));
        assert!(ProblemSpec::new(c.clone(), Matrix::zeros(p, 2), id.clone(), id, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn phi_is_infinite_when_infeasible() {
        let p = 2;
        let id = Matrix::identity(p, p);
        let spec = spec_with(Matrix::zeros(p, 2), Matrix::zeros(p, 2), id.clone(), id.clone(), 0.0);
        let y = Matrix::from_row_slice(p, p, &[1.0, 1.0, 0.0, 0.0]);
        assert!(phi_value(&spec, &Constraint::Cardinality(1), &y, &y).is_infinite());
        assert!(phi_value(&spec, &Constraint::Cardinality(2), &y, &y).is_finite());
        assert!(phi_value(&spec, &Constraint::Rank(1), &y, &y).is_finite());
    }
}

//! Proximal steps of the two PALM blocks.
//!
//! The X-block step minimizes `½‖XC − D‖² + (c/2)‖X − U‖²` in closed form.
//! The Y-block step is a Euclidean projection onto the constraint set.

use serde::{Deserialize, Serialize};

use crate::linalg::{self, sorted_svd};
use crate::objective::ProblemSpec;
use crate::{Error, Matrix, Result};

/// Low-complexity constraint on the transition matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "bound", rename_all = "snake_case")]
pub enum Constraint {
    /// At most `s` nonzero entries.
    Cardinality(usize),
    /// Rank at most `r`.
    Rank(usize),
    /// Entrywise ℓ1 norm at most `l`.
    L1Ball(f64),
    /// Nuclear norm at most `u`.
    NuclearBall(f64),
}

impl Constraint {
    pub fn validate(&self, p: usize) -> Result<()> {
        let ok = match *self {
            Constraint::Cardinality(s) => (1..=p * p).contains(&s),
            Constraint::Rank(r) => (1..=p).contains(&r),
            Constraint::L1Ball(l) => l > 0.0 && l.is_finite(),
            Constraint::NuclearBall(u) => u > 0.0 && u.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("constraint {self:?} is out of range for p={p}")))
        }
    }

    pub fn is_convex(&self) -> bool {
        matches!(self, Constraint::L1Ball(_) | Constraint::NuclearBall(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Constraint::Cardinality(_) => "cardinality",
            Constraint::Rank(_) => "rank",
            Constraint::L1Ball(_) => "l1_ball",
            Constraint::NuclearBall(_) => "nuclear_ball",
        }
    }

    /// Membership test: exact count for cardinality, numerical rank for rank,
    /// and a `1e-12` relative slack for the two norm balls.
    pub fn is_feasible(&self, y: &Matrix) -> bool {
        match *self {
            Constraint::Cardinality(s) => linalg::cardinality(y) <= s,
            Constraint::Rank(r) => linalg::numerical_rank(y) <= r,
            Constraint::L1Ball(l) => linalg::l1_norm(y) <= l + 1e-12 * l.max(1.0),
            Constraint::NuclearBall(u) => linalg::nuclear_norm(y) <= u + 1e-12 * u.max(1.0),
        }
    }

    /// Euclidean projection onto the constraint set.
    pub fn project(&self, v: &Matrix) -> Matrix {
        match *self {
            Constraint::Cardinality(s) => project_cardinality(v, s),
            Constraint::Rank(r) => project_rank(v, r),
            Constraint::L1Ball(l) => project_l1_ball(v, l).0,
            Constraint::NuclearBall(u) => project_nuclear_ball(v, u),
        }
    }
}

/// Which closed form the X-block step uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XUpdateForm {
    /// `(DCᵀ + cU)(CCᵀ + cI)⁻¹`, a p×p solve.
    Direct,
    /// `(c⁻¹DCᵀ + U)(I − C(cI + CᵀC)⁻¹Cᵀ)`, an (n−1)×(n−1) solve.
    Woodbury,
}

impl XUpdateForm {
    /// Direct when `p ≤ n − 1`, Woodbury otherwise.
    pub fn for_problem(spec: &ProblemSpec) -> Self {
        if spec.p() <= spec.transitions() {
            XUpdateForm::Direct
        } else {
            XUpdateForm::Woodbury
        }
    }
}

/// X-block proximal map with the data products cached across iterations.
#[derive(Debug, Clone)]
pub struct XUpdate {
    form: XUpdateForm,
    c: Matrix,
    dct: Matrix,
    // CCᵀ for the direct form, CᵀC for Woodbury
    gram: Matrix,
}

impl XUpdate {
    pub fn new(spec: &ProblemSpec) -> Self {
        Self::with_form(spec, XUpdateForm::for_problem(spec))
    }

    pub fn with_form(spec: &ProblemSpec, form: XUpdateForm) -> Self {
        let c = spec.c();
        let dct = spec.d() * c.transpose();
        let gram = match form {
            XUpdateForm::Direct => c * c.transpose(),
            XUpdateForm::Woodbury => c.tr_mul(c),
        };
        Self { form, c: c.clone(), dct, gram }
    }

    pub fn form(&self) -> XUpdateForm {
        self.form
    }

    /// `argmin_X ½‖XC − D‖² + (ck/2)‖X − U‖²`.
    pub fn apply(&self, u: &Matrix, ck: f64) -> Matrix {
        assert!(ck > 0.0, "proximal coefficient must be positive");
        let mut system = self.gram.clone();
        for i in 0..system.nrows() {
            system[(i, i)] += ck;
        }
        // SPD because ck > 0
        let chol = system.cholesky().expect("Gram matrix plus ck·I is positive definite");
        match self.form {
            XUpdateForm::Direct => {
                let rhs = &self.dct + u * ck;
                chol.solve(&rhs.transpose()).transpose()
            }
            XUpdateForm::Woodbury => {
                let w = &self.dct / ck + u;
                let wc = &w * &self.c;
                let z = chol.solve(&wc.transpose()).transpose();
                w - z * self.c.transpose()
            }
        }
    }
}

/// X-update in the direct form.
pub fn prox_x_direct(spec: &ProblemSpec, u: &Matrix, ck: f64) -> Matrix {
    XUpdate::with_form(spec, XUpdateForm::Direct).apply(u, ck)
}

/// X-update in the Woodbury form.
pub fn prox_x_woodbury(spec: &ProblemSpec, u: &Matrix, ck: f64) -> Matrix {
    XUpdate::with_form(spec, XUpdateForm::Woodbury).apply(u, ck)
}

/// Keeps the `s` entries of largest magnitude. Ties at the cut are resolved
/// in favour of the smallest row-major linear index, so the output never has
/// more than `s` nonzeros.
pub fn project_cardinality(v: &Matrix, s: usize) -> Matrix {
    let (rows, cols) = v.shape();
    if s >= rows * cols {
        return v.clone();
    }
    let mut order: Vec<usize> = (0..rows * cols).collect();
    let mag = |lin: usize| v[(lin / cols, lin % cols)].abs();
    let cmp = |a: &usize, b: &usize| mag(*b).total_cmp(&mag(*a)).then(a.cmp(b));
    if s > 0 {
        order.select_nth_unstable_by(s - 1, cmp);
    }
    let mut out = Matrix::zeros(rows, cols);
    for &lin in &order[..s] {
        let (i, j) = (lin / cols, lin % cols);
        out[(i, j)] = v[(i, j)];
    }
    out
}

/// Best rank-`r` approximation by truncated SVD.
pub fn project_rank(v: &Matrix, r: usize) -> Matrix {
    let (u, sv, vt) = sorted_svd(v);
    let r = r.min(sv.len());
    let mut left = u.columns(0, r).into_owned();
    for (j, s) in sv.iter().take(r).enumerate() {
        left.column_mut(j).scale_mut(*s);
    }
    left * vt.rows(0, r)
}

/// Projection onto `{Y : Σ|Yᵢⱼ| ≤ l}`. Also returns the soft threshold θ
/// (zero when `v` is already inside the ball).
pub fn project_l1_ball(v: &Matrix, l: f64) -> (Matrix, f64) {
    let (out, theta) = linalg::project_vec_l1(v.as_slice(), l);
    (Matrix::from_column_slice(v.nrows(), v.ncols(), &out), theta)
}

/// Projection onto `{Y : ‖Y‖_* ≤ u}` by projecting the singular values onto
/// the ℓ1 ball.
pub fn project_nuclear_ball(v: &Matrix, u: f64) -> Matrix {
    let (left, sv, vt) = sorted_svd(v);
    let total: f64 = sv.iter().sum();
    if total <= u {
        return v.clone();
    }
    let (shrunk, _) = linalg::project_vec_l1(&sv, u);
    let mut scaled = left;
    for (j, s) in shrunk.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*s);
    }
    scaled * vt
}

/// Y-block proximal map. The coefficient `dk` scales the quadratic term but
/// does not move the minimizer of a set projection.
pub fn prox_y(v: &Matrix, dk: f64, constraint: &Constraint) -> Matrix {
    assert!(dk > 0.0, "proximal coefficient must be positive");
    constraint.project(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn cardinality_examples() {
        let v = Matrix::from_row_slice(2, 2, &[3.0, -1.0, 0.5, 2.0]);
        assert_eq!(project_cardinality(&v, 2), Matrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 2.0]));
        assert_eq!(project_cardinality(&v, 4), v);
        let tie = Matrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        assert_eq!(project_cardinality(&tie, 1), Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0]));
        assert_eq!(project_cardinality(&tie, 3), Matrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn rank_examples() {
        let d = Matrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let out = project_rank(&d, 2);
        assert!((out - Matrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 0.0]))).norm() < 1e-12);
        let v = Matrix::from_fn(4, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        assert!((project_rank(&v, 4) - &v).norm() < 1e-10 * v.norm().max(1.0));
    }

    #[test]
    fn l1_examples() {
        let v = Matrix::from_row_slice(1, 2, &[3.0, 1.0]);
        let (out, theta) = project_l1_ball(&v, 2.0);
        assert_eq!(out, Matrix::from_row_slice(1, 2, &[2.0, 0.0]));
        assert_eq!(theta, 1.0);
        let (out, _) = project_l1_ball(&Matrix::from_element(1, 1, 5.0), 2.0);
        assert_eq!(out[(0, 0)], 2.0);
        let inside = Matrix::from_row_slice(1, 3, &[0.1, -0.2, 0.3]);
        assert_eq!(project_l1_ball(&inside, 1.0), (inside.clone(), 0.0));
    }

    #[test]
    fn nuclear_examples() {
        let d = Matrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let out = project_nuclear_ball(&d, 2.0);
        assert!((out - Matrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]))).norm() < 1e-12);
        assert_eq!(project_nuclear_ball(&d, 5.0), d);
    }

    #[test]
    fn constraint_validation() {
        assert!(Constraint::Cardinality(0).validate(3).is_err());
        assert!(Constraint::Cardinality(9).validate(3).is_ok());
        assert!(Constraint::Cardinality(10).validate(3).is_err());
        assert!(Constraint::Rank(4).validate(3).is_err());
        assert!(Constraint::L1Ball(0.0).validate(3).is_err());
        assert!(Constraint::NuclearBall(f64::INFINITY).validate(3).is_err());
    }

    #[test]
    fn constraint_json_shape() {
        let c: Constraint = serde_json::from_str(r#"{"kind":"cardinality","bound":5000}"#).unwrap();
        assert_eq!(c, Constraint::Cardinality(5000));
        let c: Constraint = serde_json::from_str(r#"{"kind":"l1_ball","bound":2.5}"#).unwrap();
        assert_eq!(c, Constraint::L1Ball(2.5));
    }

    #[test]
    fn prox_x_with_no_data_returns_anchor() {
        let p = 3;
        let id = Matrix::identity(p, p);
        let spec = ProblemSpec::new(Matrix::zeros(p, 2), Matrix::zeros(p, 2), id.clone(), id, 1.0, 1.0, 0.0).unwrap();
        let u = Matrix::from_fn(p, p, |i, j| i as f64 - j as f64 * 0.5);
        assert!((prox_x_direct(&spec, &u, 0.7) - &u).norm() < 1e-14);
        assert!((prox_x_woodbury(&spec, &u, 0.7) - &u).norm() < 1e-14);
    }
}

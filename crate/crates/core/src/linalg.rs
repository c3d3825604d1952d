//! Small dense linear-algebra helpers shared by the other modules.

use nalgebra::{SymmetricEigen, SVD};

use crate::{Error, Matrix, Result};

/// Relative tolerance used for numerical rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &Matrix) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Singular values sorted in decreasing order.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    sorted_svd(a).1
}

/// Thin SVD with the triplets reordered so singular values decrease.
///
/// nalgebra's bidiagonal SVD occasionally returns factors that do not
/// reproduce the input when a singular value is exactly zero, so the
/// reconstruction is checked and a one-sided Jacobi SVD is used instead when
/// it is off. Left vectors paired with a zero singular value may be zero.
pub(crate) fn sorted_svd(a: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let (u, sv, vt) = nalgebra_svd(a).unwrap_or_else(|| jacobi_svd(a));
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let u_sorted = Matrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let vt_sorted = Matrix::from_fn(order.len(), vt.ncols(), |r, c| vt[(order[r], c)]);
    let sv = order.iter().map(|&i| sv[i]).collect();
    (u_sorted, sv, vt_sorted)
}

fn recompose(u: &Matrix, sv: &[f64], vt: &Matrix) -> Matrix {
    let mut left = u.clone();
    for (j, s) in sv.iter().enumerate() {
        left.column_mut(j).scale_mut(*s);
    }
    left * vt
}

fn nalgebra_svd(a: &Matrix) -> Option<(Matrix, Vec<f64>, Matrix)> {
    let SVD { u, v_t, singular_values } = a.clone().svd(true, true);
    let (u, vt) = (u?, v_t?);
    let sv: Vec<f64> = singular_values.iter().copied().collect();
    let err = (recompose(&u, &sv, &vt) - a).norm();
    (err <= 1e-11 * a.norm() && sv.iter().all(|s| *s >= 0.0)).then_some((u, sv, vt))
}

/// One-sided (Hestenes) Jacobi SVD.
fn jacobi_svd(a: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    if a.nrows() < a.ncols() {
        let (u, sv, vt) = jacobi_svd(&a.transpose());
        return (vt.transpose(), sv, u.transpose());
    }
    let n = a.ncols();
    let mut w = a.clone();
    let mut v = Matrix::identity(n, n);
    for _ in 0..100 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = w.column(i).norm_squared();
                let beta = w.column(j).norm_squared();
                let gamma = w.column(i).dot(&w.column(j));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta >= 0.0 { 1.0 } else { -1.0 } / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut w, &mut v] {
                    for k in 0..m.nrows() {
                        let (x, y) = (m[(k, i)], m[(k, j)]);
                        m[(k, i)] = c * x - s * y;
                        m[(k, j)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sv: Vec<f64> = w.column_iter().map(|c| c.norm()).collect();
    for (j, s) in sv.iter().enumerate() {
        if *s > 0.0 {
            w.column_mut(j).unscale_mut(*s);
        }
    }
    (w, sv, v.transpose())
}

/// Number of singular values above `RANK_TOL * sigma_max`.
pub fn numerical_rank(a: &Matrix) -> usize {
    let sv = singular_values(a);
    match sv.first() {
        Some(&smax) if smax > 0.0 => sv.iter().filter(|&&s| s > RANK_TOL * smax).count(),
        _ => 0,
    }
}

pub fn nuclear_norm(a: &Matrix) -> f64 {
    singular_values(a).iter().sum()
}

/// Entrywise ℓ1 norm.
pub fn l1_norm(a: &Matrix) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// Count of exactly nonzero entries.
pub fn cardinality(a: &Matrix) -> usize {
    a.iter().filter(|v| **v != 0.0).count()
}

/// Count of entries whose magnitude exceeds `rel_tol * max|a_ij|`.
pub fn count_nonzeros(a: &Matrix, rel_tol: f64) -> usize {
    let amax = a.amax();
    if amax == 0.0 {
        return 0;
    }
    a.iter().filter(|v| v.abs() > rel_tol * amax).count()
}

/// `‖a − aᵀ‖_F ≤ rel_tol · ‖a‖_F`.
pub fn is_symmetric(a: &Matrix, rel_tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let asym = (a - a.transpose()).norm();
    asym <= rel_tol * a.norm()
}

pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

/// Frobenius inner product.
pub fn frob_dot(a: &Matrix, b: &Matrix) -> f64 {
    a.dot(b)
}

/// Symmetric square root factor `L` with `L Lᵀ = q` for a PSD matrix.
/// Slightly negative eigenvalues from roundoff are clamped to zero.
pub fn psd_factor(q: &Matrix) -> Result<Matrix> {
    if !is_symmetric(q, 1e-12) {
        return Err(Error::NotSymmetric("covariance factor input".into()));
    }
    let eig = SymmetricEigen::new(symmetrize(q));
    let scale = eig.eigenvalues.amax();
    if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
        return Err(Error::InvalidArgument("covariance matrix is not positive semidefinite".into()));
    }
    let mut v = eig.eigenvectors;
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        v.column_mut(j).scale_mut(s);
    }
    Ok(v)
}

/// Euclidean projection of a nonnegative-or-signed vector onto the ℓ1 ball of
/// radius `radius`, by the sort-and-threshold method. Returns the projected
/// vector and the soft threshold (zero when already inside the ball).
pub fn project_vec_l1(v: &[f64], radius: f64) -> (Vec<f64>, f64) {
    let norm1: f64 = v.iter().map(|x| x.abs()).sum();
    if norm1 <= radius {
        return (v.to_vec(), 0.0);
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in mags.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - radius) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    let out = v
        .iter()
        .map(|&x| x.signum() * (x.abs() - theta).max(0.0))
        .collect();
    (out, theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormal_rows(m: &Matrix) -> f64 {
        (m * m.transpose() - Matrix::identity(m.nrows(), m.nrows())).norm()
    }

    #[test]
    fn jacobi_svd_reconstructs() {
        let a = Matrix::from_fn(5, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + 0.1 * j as f64);
        for m in [a.clone(), a.transpose()] {
            let (u, sv, vt) = jacobi_svd(&m);
            assert!((recompose(&u, &sv, &vt) - &m).norm() < 1e-13 * m.norm());
            assert!(orthonormal_rows(&vt) < 1e-13 || orthonormal_rows(&u.transpose()) < 1e-13);
        }
    }

    #[test]
    fn rank_deficient_input_keeps_its_singular_values() {
        // exactly rank 2; nalgebra's factors of this matrix are off by ~1e-2
        let d = [
            -0.20088671509935216, 5.520101205228137, -0.4170198934818109, -7.435142669113185, -6.5793168597169664,
            -4.566382600732896, 7.569591128852495, 8.253250807485376, -0.44275929025317146, 3.4879583572003185,
            5.009363742897879, 1.9216503305274337, -6.137630290865381, 8.456036921429291, 7.002811995536075,
            2.5381789170685853,
        ];
        let v = Matrix::from_column_slice(4, 4, &d);
        let (u, sv, vt) = sorted_svd(&v);
        let mut low = u.columns(0, 2).into_owned();
        for (j, &value) in sv.iter().take(2).enumerate() {
            low.column_mut(j).scale_mut(value);
        }
        let low = low * vt.rows(0, 2);
        let (u2, sv2, vt2) = sorted_svd(&low);
        assert!((recompose(&u2, &sv2, &vt2) - &low).norm() < 1e-12 * low.norm());
        assert!((sv2[0] - sv[0]).abs() < 1e-12 * sv[0] && (sv2[1] - sv[1]).abs() < 1e-12 * sv[0]);
        assert_eq!(numerical_rank(&low), 2);
    }
}

#![allow(dead_code)]

use lcvar::experiment::{generate_data, DataConfig, GeneratedData};
use lcvar::model_data::{generate_sparse_stable, VarModel};
use lcvar::objective::ProblemSpec;
use lcvar::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn spd(rng: &mut impl Rng, p: usize) -> Matrix {
    let g = gaussian(rng, p, p);
    let m = &g * g.transpose() / p as f64 + Matrix::identity(p, p);
    (&m + m.transpose()) * 0.5
}

/// Problem with arbitrary (non-data-driven) C, D, S, Q.
pub fn random_spec(rng: &mut impl Rng, p: usize, transitions: usize, rho1: f64, rho2: f64, mu: f64) -> ProblemSpec {
    let c = gaussian(rng, p, transitions);
    let d = gaussian(rng, p, transitions);
    let s = spd(rng, p);
    let q = spd(rng, p) * 0.5;
    ProblemSpec::new(c, d, s, q, rho1, rho2, mu).unwrap()
}

/// Problem built from a simulated sparse VAR(1) model.
pub fn simulated_problem(p: usize, n: usize, steady: usize, seed: u64, rho1: f64, mu: f64) -> (VarModel, GeneratedData, ProblemSpec) {
    let model = generate_sparse_stable(p, (p * p / 4).max(1), 0.9, seed).unwrap();
    let data = generate_data(&model, &DataConfig { n, m: 2 * p, steady, ..DataConfig::default() }, seed).unwrap();
    let spec = ProblemSpec::from_series(&data.train, data.s_cov(), 1.0, rho1, None, mu).unwrap();
    (model, data, spec)
}

pub fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

/// Central differences of a scalar matrix function, entry by entry.
pub fn finite_difference(f: impl Fn(&Matrix) -> f64, x: &Matrix, h: f64) -> Matrix {
    let mut g = Matrix::zeros(x.nrows(), x.ncols());
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let mut plus = x.clone();
            plus[(i, j)] += h;
            let mut minus = x.clone();
            minus[(i, j)] -= h;
            g[(i, j)] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
    }
    g
}

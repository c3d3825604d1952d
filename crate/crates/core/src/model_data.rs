//! Ground-truth models, synthetic data and the steady-state statistics that
//! feed the estimator.
//!
//! Conventions: a time series is stored as a `p × n` matrix whose columns are
//! the consecutive states `x(1) … x(n)`. Steady-state samples are stored the
//! same way, one sample per column.

use nalgebra::DVector;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, is_symmetric, psd_factor, spectral_radius};
use crate::{Error, Matrix, Result};

/// Redraws allowed when a sparse pattern comes out nilpotent.
const MAX_REDRAWS: usize = 16;

/// Kronecker (vectorized) Lyapunov solves are used up to this dimension.
const KRONECKER_MAX_DIM: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Sparse,
    Lowrank,
    Imported,
}

/// A VAR(1) model `x(t+1) = A x(t) + ε(t)` with `Cov ε = Q`.
#[derive(Debug, Clone)]
pub struct VarModel {
    a: Matrix,
    q: Matrix,
    spectral_radius: f64,
}

impl VarModel {
    pub fn new(a: Matrix, q: Matrix) -> Result<Self> {
        if !a.is_square() || q.shape() != a.shape() {
            return Err(Error::Dimension(format!(
                "A is {:?}, Q is {:?}; both must be p×p",
                a.shape(),
                q.shape()
            )));
        }
        if !is_symmetric(&q, 1e-12) {
            return Err(Error::NotSymmetric("noise covariance Q".into()));
        }
        // rejects indefinite Q
        psd_factor(&q)?;
        let spectral_radius = spectral_radius(&a);
        Ok(Self { a, q, spectral_radius })
    }

    /// Model with isotropic noise `Q = σ² I`.
    pub fn with_noise_std(a: Matrix, sigma: f64) -> Result<Self> {
        let p = a.nrows();
        Self::new(a, Matrix::identity(p, p) * (sigma * sigma))
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn p(&self) -> usize {
        self.a.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_radius < 1.0
    }
}

/// Consecutive states of one trajectory, one state per column.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesData {
    states: Matrix,
}

impl TimeSeriesData {
    pub fn new(states: Matrix) -> Result<Self> {
        if states.ncols() < 2 {
            return Err(Error::InsufficientData(format!(
                "time series needs at least 2 states, got {}",
                states.ncols()
            )));
        }
        Ok(Self { states })
    }

    pub fn states(&self) -> &Matrix {
        &self.states
    }

    pub fn p(&self) -> usize {
        self.states.nrows()
    }

    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.states.ncols() == 0
    }

    /// `C = [x(1) … x(n−1)]`.
    pub fn lagged(&self) -> Matrix {
        self.states.columns(0, self.len() - 1).into_owned()
    }

    /// `D = [x(2) … x(n)]`.
    pub fn led(&self) -> Matrix {
        self.states.columns(1, self.len() - 1).into_owned()
    }

    /// Contiguous sub-series `x(start) … x(start + len − 1)` (zero based).
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() {
            return Err(Error::InvalidArgument(format!(
                "window {start}+{len} exceeds series of length {}",
                self.len()
            )));
        }
        Self::new(self.states.columns(start, len).into_owned())
    }
}

/// Nonsequence samples from the stationary distribution, one per column.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateData {
    samples: Matrix,
}

impl SteadyStateData {
    pub fn new(samples: Matrix) -> Result<Self> {
        if samples.ncols() < 2 {
            return Err(Error::InsufficientData(format!(
                "steady-state data needs at least 2 samples, got {}",
                samples.ncols()
            )));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &Matrix {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }
}

fn normal_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    // fill row by row so the draw order does not depend on storage layout
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// Sparse stable transition matrix: `nnz` standard-normal entries at
/// uniformly random positions, rescaled so the spectral radius equals
/// `target_radius`. `Q` is set to the identity.
pub fn generate_sparse_stable(p: usize, nnz: usize, target_radius: f64, seed: u64) -> Result<VarModel> {
    if p == 0 || nnz == 0 || nnz > p * p {
        return Err(Error::InvalidArgument(format!("need 1 ≤ nnz ≤ p², got p={p}, nnz={nnz}")));
    }
    if !(target_radius > 0.0 && target_radius < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target spectral radius must lie in (0, 1), got {target_radius}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_REDRAWS {
        let mut m = Matrix::zeros(p, p);
        let positions = index::sample(&mut rng, p * p, nnz);
        for lin in positions.iter() {
            let v: f64 = rng.sample(StandardNormal);
            // an exact zero would silently lower the cardinality
            let v = if v == 0.0 { f64::MIN_POSITIVE } else { v };
            m[(lin / p, lin % p)] = v;
        }
        let tau = spectral_radius(&m);
        if tau > 1e-8 * m.norm() {
            let a = m * (target_radius / tau);
            return VarModel::new(a, Matrix::identity(p, p));
        }
    }
    Err(Error::DegenerateDraw {
        attempts: MAX_REDRAWS,
        reason: format!("every sparse pattern with p={p}, nnz={nnz} had zero spectral radius"),
    })
}

/// Low-rank stable transition matrix `A = U Σ Vᵀ` with orthonormal `U, V`
/// (p×r) from QR of Gaussian matrices and `Σ` uniform on `[0, 1)`.
/// `Q` is set to the identity.
pub fn generate_lowrank_stable(p: usize, r: usize, seed: u64) -> Result<VarModel> {
    if r == 0 || r > p {
        return Err(Error::InvalidArgument(format!("need 1 ≤ r ≤ p, got p={p}, r={r}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = normal_matrix(&mut rng, p, r).qr().q();
    let v = normal_matrix(&mut rng, p, r).qr().q();
    let sigma: Vec<f64> = (0..r).map(|_| rng.random::<f64>()).collect();
    let mut us = u;
    for (j, s) in sigma.iter().enumerate() {
        us.column_mut(j).scale_mut(*s);
    }
    let a = us * v.transpose();
    VarModel::new(a, Matrix::identity(p, p))
}

/// `a / (factor · τ(a))`.
pub fn rescale_to_stable(a: &Matrix, factor: f64) -> Result<Matrix> {
    if !(factor > 0.0) {
        return Err(Error::InvalidArgument(format!("rescale factor must be positive, got {factor}")));
    }
    let tau = spectral_radius(a);
    if tau <= 1e-14 * a.norm() || tau == 0.0 {
        return Err(Error::ZeroSpectralRadius);
    }
    Ok(a / (factor * tau))
}

/// `exp(a_c · dt)` by scaling and squaring with a truncated Taylor series.
pub fn discretize(a_c: &Matrix, dt: f64) -> Result<Matrix> {
    if !a_c.is_square() {
        return Err(Error::Dimension("continuous-time matrix must be square".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    Ok(expm(&(a_c * dt)))
}

fn one_norm(m: &Matrix) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub(crate) fn expm(m: &Matrix) -> Matrix {
    let p = m.nrows();
    let norm = one_norm(m);
    // scale so ‖m / 2^s‖₁ ≤ 1/2; the Taylor tail past degree 18 is then
    // below 1e-16 relative
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = m / 2f64.powi(squarings);
    let mut sum = Matrix::identity(p, p);
    let mut term = Matrix::identity(p, p);
    for k in 1..=30 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if term.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Noise std, seed and starting state for [`simulate`] are explicit; the
/// model's own `Q` is not used here.
///
/// Returns `steps` states: `x0, A x0 + ε, …` with `ε ~ N(0, σ² I)`.
pub fn simulate(model: &VarModel, x0: &DVector<f64>, steps: usize, sigma: f64, seed: u64) -> Result<TimeSeriesData> {
    let p = model.p();
    if x0.len() != p {
        return Err(Error::Dimension(format!("x0 has length {}, model has p={p}", x0.len())));
    }
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("simulate needs steps ≥ 2, got {steps}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Matrix::zeros(p, steps);
    states.set_column(0, x0);
    let mut x = x0.clone();
    for t in 1..steps {
        let mut next = model.a() * &x;
        if sigma != 0.0 {
            for v in next.iter_mut() {
                *v += sigma * rng.sample::<f64, _>(StandardNormal);
            }
        }
        states.set_column(t, &next);
        x = next;
    }
    TimeSeriesData::new(states)
}

/// Draws `n_samples` approximately independent states from the stationary
/// distribution by subsampling one long trajectory driven by `N(0, Q)` noise.
///
/// Defaults: `burn_in = 10·p` steps, `spacing = p` steps between samples.
pub fn sample_steady_state(
    model: &VarModel,
    n_samples: usize,
    burn_in: Option<usize>,
    spacing: Option<usize>,
    seed: u64,
) -> Result<SteadyStateData> {
    if !model.is_stable() {
        return Err(Error::Unstable(model.spectral_radius()));
    }
    if n_samples < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 steady-state samples, got {n_samples}")));
    }
    let p = model.p();
    let burn_in = burn_in.unwrap_or(10 * p);
    let spacing = spacing.unwrap_or(p).max(1);
    let factor = psd_factor(model.q())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DVector::<f64>::zeros(p);
    let mut w = DVector::<f64>::zeros(p);
    let step = |x: &DVector<f64>, rng: &mut ChaCha8Rng, w: &mut DVector<f64>| {
        for v in w.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        model.a() * x + &factor * &*w
    };
    for _ in 0..burn_in {
        x = step(&x, &mut rng, &mut w);
    }
    let mut samples = Matrix::zeros(p, n_samples);
    for i in 0..n_samples {
        for _ in 0..spacing {
            x = step(&x, &mut rng, &mut w);
        }
        samples.set_column(i, &x);
    }
    SteadyStateData::new(samples)
}

/// Unbiased sample covariance `1/(N−1) Σ (zⁱ − z̄)(zⁱ − z̄)ᵀ`, symmetrized.
pub fn sample_covariance(data: &SteadyStateData) -> Matrix {
    let z = data.samples();
    let n = z.ncols();
    let mean = z.column_mean();
    let mut centered = z.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let s = (&centered * centered.transpose()) / (n as f64 - 1.0);
    linalg::symmetrize(&s)
}

/// Solves `A P Aᵀ + Q = P` for stable `A`.
///
/// Small systems use the vectorized form `(I − A⊗A) vec P = vec Q`; larger
/// ones use the doubling iteration `P ← P + Aₖ P Aₖᵀ, Aₖ₊₁ = Aₖ²`.
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    if !a.is_square() || a.shape() != q.shape() {
        return Err(Error::Dimension(format!("A is {:?}, Q is {:?}", a.shape(), q.shape())));
    }
    let tau = spectral_radius(a);
    if tau >= 1.0 {
        return Err(Error::Unstable(tau));
    }
    let p = a.nrows();
    let sol = if p <= KRONECKER_MAX_DIM {
        let kron = a.kronecker(a);
        let system = Matrix::identity(p * p, p * p) - kron;
        let rhs = DVector::from_column_slice(q.as_slice());
        let vec_p = system
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular Lyapunov system".into()))?;
        Matrix::from_column_slice(p, p, vec_p.as_slice())
    } else {
        let mut sol = q.clone();
        let mut ak = a.clone();
        for _ in 0..64 {
            let incr = &ak * &sol * ak.transpose();
            let incr_norm = incr.norm();
            sol += incr;
            if incr_norm <= 1e-17 * sol.norm() {
                break;
            }
            ak = &ak * &ak;
        }
        sol
    };
    Ok(linalg::symmetrize(&sol))
}

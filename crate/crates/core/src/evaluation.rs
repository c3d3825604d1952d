//! Test-set metrics, ℓ1-bound matching by bisection, and hyperparameter
//! selection.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::gp::{gp_solve, GpConfig};
use crate::linalg::count_nonzeros;
use crate::objective::ProblemSpec;
use crate::palm::{palm_solve, PalmConfig};
use crate::proximal::Constraint;
use crate::report::{fmt_real, SolveReport};
use crate::{Error, Matrix, Result, TimeSeriesData};

/// Entries at or below `ZERO_TOL · max|entry|` do not count as nonzeros.
pub const ZERO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalResult {
    pub normalized_error: f64,
    pub cosine_score: f64,
    /// Number of test states `m`.
    pub test_length: usize,
    /// Test steps dropped by either metric because a norm vanished.
    pub skipped_terms: usize,
}

struct MeanOverSteps {
    value: f64,
    skipped: Vec<usize>,
}

fn check_shapes(estimate: &Matrix, test: &TimeSeriesData) -> Result<()> {
    let p = test.p();
    if estimate.shape() != (p, p) {
        return Err(Error::Dimension(format!(
            "estimate is {:?} but test states have dimension {p}",
            estimate.shape()
        )));
    }
    Ok(())
}

fn mean_over_steps(
    estimate: &Matrix,
    test: &TimeSeriesData,
    name: &str,
    term: impl Fn(&nalgebra::DVector<f64>, &nalgebra::DVector<f64>, &nalgebra::DVector<f64>) -> Option<f64>,
) -> Result<MeanOverSteps> {
    check_shapes(estimate, test)?;
    let states = test.states();
    let predicted = estimate * states;
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut skipped = Vec::new();
    for t in 0..test.len() - 1 {
        let x_t = states.column(t).into_owned();
        let x_next = states.column(t + 1).into_owned();
        let ax = predicted.column(t).into_owned();
        match term(&x_t, &x_next, &ax) {
            Some(v) => {
                sum += v;
                used += 1;
            }
            None => skipped.push(t),
        }
    }
    if !skipped.is_empty() {
        log::warn!("{name}: skipped {} degenerate test steps", skipped.len());
    }
    if used == 0 {
        return Err(Error::InsufficientData(format!("{name}: every test step is degenerate")));
    }
    Ok(MeanOverSteps { value: sum / used as f64, skipped })
}

fn normalized_error_terms(estimate: &Matrix, test: &TimeSeriesData) -> Result<MeanOverSteps> {
    mean_over_steps(estimate, test, "normalized error", |x_t, x_next, ax| {
        let denom = (x_next - x_t).norm();
        (denom > 0.0).then(|| (x_next - ax).norm() / denom)
    })
}

fn cosine_terms(estimate: &Matrix, test: &TimeSeriesData) -> Result<MeanOverSteps> {
    mean_over_steps(estimate, test, "cosine score", |x_t, x_next, ax| {
        let change = x_next - x_t;
        let residual = x_t - ax;
        let denom = change.norm() * residual.norm();
        (denom > 0.0).then(|| (change.dot(&residual).abs() / denom).min(1.0))
    })
}

/// Mean over test steps of `‖x(t+1) − Âx(t)‖ / ‖x(t+1) − x(t)‖`.
pub fn normalized_error(estimate: &Matrix, test: &TimeSeriesData) -> Result<f64> {
    Ok(normalized_error_terms(estimate, test)?.value)
}

/// Mean over test steps of the absolute cosine between `x(t+1) − x(t)` and
/// `x(t) − Âx(t)`.
pub fn cosine_score(estimate: &Matrix, test: &TimeSeriesData) -> Result<f64> {
    Ok(cosine_terms(estimate, test)?.value)
}

/// Both metrics plus the count of skipped degenerate steps.
pub fn evaluate(estimate: &Matrix, test: &TimeSeriesData) -> Result<EvalResult> {
    let ne = normalized_error_terms(estimate, test)?;
    let cs = cosine_terms(estimate, test)?;
    let mut skipped = ne.skipped;
    skipped.extend(cs.skipped);
    skipped.sort_unstable();
    skipped.dedup();
    Ok(EvalResult {
        normalized_error: ne.value,
        cosine_score: cs.value,
        test_length: test.len(),
        skipped_terms: skipped.len(),
    })
}

/// Solver selection shared by fitting, bisection and cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Solver {
    Palm(PalmConfig),
    Gp(GpConfig),
}

impl Default for Solver {
    fn default() -> Self {
        Solver::Palm(PalmConfig::default())
    }
}

impl Solver {
    pub fn name(&self) -> &'static str {
        match self {
            Solver::Palm(_) => "palm",
            Solver::Gp(_) => "gp",
        }
    }

    pub fn solve(&self, spec: &ProblemSpec, constraint: &Constraint) -> Result<SolveReport> {
        match self {
            Solver::Palm(cfg) => palm_solve(spec, constraint, None, cfg),
            Solver::Gp(cfg) => gp_solve(spec, constraint, None, cfg),
        }
    }
}

/// Solver used inside ℓ1 bisection.
pub type L1Solver = Solver;

#[derive(Debug, Clone)]
pub struct BisectionOutcome {
    /// Selected ℓ1 bound.
    pub l: f64,
    pub report: SolveReport,
    /// Nonzeros of the solution at `l`.
    pub nnz: usize,
    /// Whether `|nnz − target| ≤ tol_nnz` was reached.
    pub converged: bool,
    pub rounds: usize,
    /// Final bracket and the nonzero counts at its ends.
    pub bracket: (f64, f64),
    pub bracket_nnz: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BisectionConfig {
    pub tol_nnz: usize,
    pub max_rounds: usize,
    /// Halvings/doublings allowed while establishing the bracket.
    pub max_widenings: usize,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        Self { tol_nnz: 0, max_rounds: 40, max_widenings: 30 }
    }
}

/// Finds an ℓ1 bound whose solution has `target_nnz` nonzeros (within
/// `tol_nnz`). The count is taken with [`ZERO_TOL`].
pub fn bisect_l1_threshold(
    spec: &ProblemSpec,
    target_nnz: usize,
    interval: (f64, f64),
    config: &BisectionConfig,
    solver: &Solver,
) -> Result<BisectionOutcome> {
    let (mut lo, mut hi) = interval;
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::InvalidArgument(format!("need 0 < l_low < l_up, got [{lo}, {hi}]")));
    }
    let solve = |l: f64| -> Result<(SolveReport, usize)> {
        let report = solver.solve(spec, &Constraint::L1Ball(l))?;
        let nnz = count_nonzeros(&report.estimate, ZERO_TOL);
        Ok((report, nnz))
    };
    let within = |nnz: usize| nnz.abs_diff(target_nnz) <= config.tol_nnz;

    let mut low = solve(lo)?;
    let mut widen = 0;
    while low.1 > target_nnz && !within(low.1) {
        if widen == config.max_widenings {
            return Err(Error::Bracket(format!("lower bound {lo} still gives {} > {target_nnz} nonzeros", low.1)));
        }
        lo *= 0.5;
        low = solve(lo)?;
        widen += 1;
    }
    let mut high = solve(hi)?;
    widen = 0;
    while high.1 < target_nnz && !within(high.1) {
        if widen == config.max_widenings {
            return Err(Error::Bracket(format!("upper bound {hi} still gives {} < {target_nnz} nonzeros", high.1)));
        }
        hi *= 2.0;
        high = solve(hi)?;
        widen += 1;
    }

    let finish = |l, (report, nnz): (SolveReport, usize), converged, rounds, bracket, bracket_nnz| BisectionOutcome {
        l,
        report,
        nnz,
        converged,
        rounds,
        bracket,
        bracket_nnz,
    };
    if within(low.1) {
        let counts = (low.1, high.1);
        return Ok(finish(lo, low, true, 0, (lo, hi), counts));
    }
    if within(high.1) {
        let counts = (low.1, high.1);
        return Ok(finish(hi, high, true, 0, (lo, hi), counts));
    }

    for round in 1..=config.max_rounds {
        let mid = 0.5 * (lo + hi);
        let trial = solve(mid)?;
        if within(trial.1) {
            let counts = (low.1, high.1);
            return Ok(finish(mid, trial, true, round, (lo, hi), counts));
        }
        if trial.1 < target_nnz {
            lo = mid;
            low = trial;
        } else {
            hi = mid;
            high = trial;
        }
    }
    let counts = (low.1, high.1);
    let rounds = config.max_rounds;
    log::warn!("bisection did not reach {target_nnz} ± {} nonzeros; bracket counts {counts:?}", config.tol_nnz);
    if low.1.abs_diff(target_nnz) <= high.1.abs_diff(target_nnz) {
        Ok(finish(lo, low, false, rounds, (lo, hi), counts))
    } else {
        Ok(finish(hi, high, false, rounds, (lo, hi), counts))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    NormalizedError,
    CosineScore,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::NormalizedError => "normalized_error",
            Metric::CosineScore => "cosine_score",
        }
    }

    fn pick(&self, r: &EvalResult) -> f64 {
        match self {
            Metric::NormalizedError => r.normalized_error,
            Metric::CosineScore => r.cosine_score,
        }
    }

    /// Whether `a` is strictly better than `b`.
    pub fn better(&self, a: f64, b: f64) -> bool {
        match self {
            Metric::NormalizedError => a < b,
            Metric::CosineScore => a > b,
        }
    }
}

/// Train/validation split of the training series. Splits keep time order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationScheme {
    /// First `train_fraction` of the states for fitting, the rest for
    /// validation.
    Holdout { train_fraction: f64 },
    /// Transitions split into `folds` contiguous blocks; each block is
    /// validated once against a fit on the remaining transitions.
    BlockedKFold { folds: usize },
}

impl Default for ValidationScheme {
    fn default() -> Self {
        ValidationScheme::Holdout { train_fraction: 0.7 }
    }
}

/// Everything about a fit that the grid does not vary.
#[derive(Debug, Clone)]
pub struct FitTemplate {
    pub constraint: Constraint,
    pub solver: Solver,
    /// Fixed `ρ₂`; when `None` it is `rho2_scale · ρ₁ ‖S‖_F²` per cell.
    pub rho2: Option<f64>,
    pub rho2_scale: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvCell {
    pub rho1: f64,
    pub sigma: f64,
    pub value: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub best_rho1: f64,
    pub best_sigma: f64,
    pub best_value: f64,
    pub metric: Metric,
    /// Cells in grid order (`rho1` outer, `sigma` inner).
    pub table: Vec<CvCell>,
}

impl CvOutcome {
    /// Score table as `rho1,sigma,metric,value,status`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rho1", "sigma", "metric", "value", "status"])?;
        for cell in &self.table {
            w.write_record([
                fmt_real(cell.rho1),
                fmt_real(cell.sigma),
                self.metric.name().to_string(),
                cell.value.map(fmt_real).unwrap_or_default(),
                cell.status.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Split {
    c: Matrix,
    d: Matrix,
    validation: TimeSeriesData,
}

fn splits(series: &TimeSeriesData, scheme: &ValidationScheme) -> Result<Vec<Split>> {
    let n = series.len();
    let states = series.states();
    match *scheme {
        ValidationScheme::Holdout { train_fraction } => {
            if !(train_fraction > 0.0 && train_fraction < 1.0) {
                return Err(Error::InvalidArgument(format!("train_fraction must be in (0,1), got {train_fraction}")));
            }
            let n_train = ((n as f64) * train_fraction).round() as usize;
            if n_train < 2 || n_train >= n {
                return Err(Error::InsufficientData(format!(
                    "series of length {n} cannot be split at fraction {train_fraction}"
                )));
            }
            let train = series.window(0, n_train)?;
            // the boundary state is shared so no transition is lost
            let validation = series.window(n_train - 1, n - n_train + 1)?;
            Ok(vec![Split { c: train.lagged(), d: train.led(), validation }])
        }
        ValidationScheme::BlockedKFold { folds } => {
            let transitions = n - 1;
            if folds < 2 || folds > transitions / 2 {
                return Err(Error::InsufficientData(format!(
                    "{folds} folds need at least {} transitions, have {transitions}",
                    2 * folds.max(2)
                )));
            }
            let mut out = Vec::with_capacity(folds);
            for f in 0..folds {
                let start = f * transitions / folds;
                let end = (f + 1) * transitions / folds;
                let keep: Vec<usize> = (0..transitions).filter(|t| *t < start || *t >= end).collect();
                let c = Matrix::from_fn(series.p(), keep.len(), |i, j| states[(i, keep[j])]);
                let d = Matrix::from_fn(series.p(), keep.len(), |i, j| states[(i, keep[j] + 1)]);
                let validation = series.window(start, end - start + 1)?;
                out.push(Split { c, d, validation });
            }
            Ok(out)
        }
    }
}

/// Grid search over `(ρ₁, σ)` with `Q = σ² I`. Failed fits are recorded and
/// skipped; ties keep the first cell in grid order.
pub fn cross_validate(
    series: &TimeSeriesData,
    s_cov: &Matrix,
    rho1_grid: &[f64],
    sigma_grid: &[f64],
    scheme: &ValidationScheme,
    metric: Metric,
    template: &FitTemplate,
) -> Result<CvOutcome> {
    if rho1_grid.is_empty() || sigma_grid.is_empty() {
        return Err(Error::InvalidArgument("cross-validation grids must be nonempty".into()));
    }
    let folds = splits(series, scheme)?;
    let p = series.p();
    let mut table = Vec::with_capacity(rho1_grid.len() * sigma_grid.len());
    for &rho1 in rho1_grid {
        for &sigma in sigma_grid {
            let cell = (|| -> Result<(f64, String)> {
                let mut total = 0.0;
                let mut worst_status = "converged";
                for split in &folds {
                    let q = Matrix::identity(p, p) * (sigma * sigma);
                    let rho2 = template
                        .rho2
                        .unwrap_or_else(|| template.rho2_scale * crate::objective::default_rho2(rho1, s_cov));
                    let spec =
                        ProblemSpec::new(split.c.clone(), split.d.clone(), s_cov.clone(), q, rho1, rho2, template.mu)?;
                    let report = template.solver.solve(&spec, &template.constraint)?;
                    if !report.status.is_converged() {
                        worst_status = "not_converged";
                    }
                    total += metric.pick(&evaluate(&report.estimate, &split.validation)?);
                }
                Ok((total / folds.len() as f64, worst_status.to_string()))
            })();
            table.push(match cell {
                Ok((value, status)) => CvCell { rho1, sigma, value: Some(value), status },
                Err(e) => {
                    log::warn!("cross-validation cell rho1={rho1}, sigma={sigma} failed: {e}");
                    CvCell { rho1, sigma, value: None, status: format!("failed: {e}") }
                }
            });
        }
    }
    let mut best: Option<&CvCell> = None;
    for cell in &table {
        if let Some(v) = cell.value {
            if best.is_none_or(|b| metric.better(v, b.value.expect("best cell has a value"))) {
                best = Some(cell);
            }
        }
    }
    let best = best.ok_or_else(|| Error::Numerical("every cross-validation cell failed".into()))?.clone();
    Ok(CvOutcome {
        best_rho1: best.rho1,
        best_sigma: best.sigma,
        best_value: best.value.expect("best cell has a value"),
        metric,
        table,
    })
}

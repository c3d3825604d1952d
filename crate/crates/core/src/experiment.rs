//! Experiment configuration and the pipelines behind the command-line tool.
//!
//! Every command reads one JSON [`ExperimentConfig`], is deterministic given
//! its seed, and writes a `report.json` that echoes the resolved config.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::evaluation::{
    bisect_l1_threshold, cross_validate, evaluate, BisectionConfig, EvalResult, FitTemplate, Metric, Solver,
    ValidationScheme, ZERO_TOL,
};
use crate::io::{read_matrix_file, read_model_bundle, write_json, write_matrix_file, write_model_bundle, ModelMeta};
use crate::linalg::{count_nonzeros, numerical_rank, spectral_radius};
use crate::model_data::{
    discretize, generate_lowrank_stable, generate_sparse_stable, rescale_to_stable, sample_covariance,
    sample_steady_state, simulate, ModelKind, SteadyStateData, TimeSeriesData, VarModel,
};
use crate::objective::{default_rho2, ProblemSpec};
use crate::palm::PalmConfig;
use crate::proximal::Constraint;
use crate::report::{fmt_real, SolveReport};
use crate::{gp::GpConfig, Error, Matrix, Result};

/// Independent stream `k` derived from a base seed.
pub fn sub_seed(seed: u64, k: u64) -> u64 {
    seed ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Where the ground-truth model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSource {
    Sparse {
        p: usize,
        nnz: usize,
        #[serde(default = "default_target_radius")]
        target_radius: f64,
    },
    Lowrank {
        p: usize,
        rank: usize,
    },
    /// A bundle directory written by `generate`, or a transition matrix CSV.
    Imported {
        #[serde(default)]
        bundle: Option<PathBuf>,
        #[serde(default)]
        a: Option<PathBuf>,
    },
}

fn default_target_radius() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Training states.
    pub n: usize,
    /// Test states.
    pub m: usize,
    /// Steady-state samples.
    pub steady: usize,
    /// Standard deviation of the driving noise, `Q = noise_std² I`.
    pub noise_std: f64,
    pub burn_in: Option<usize>,
    pub spacing: Option<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { n: 50, m: 800, steady: 1600, noise_std: 1.0, burn_in: None, spacing: None }
    }
}

/// Data files used instead of generating data from `model`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputFiles {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub steady: Option<PathBuf>,
    pub estimate: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub constraint: Constraint,
    #[serde(default = "one")]
    pub rho1: f64,
    /// Defaults to `rho2_scale · ρ₁ ‖S‖_F²`.
    #[serde(default)]
    pub rho2: Option<f64>,
    #[serde(default = "one")]
    pub rho2_scale: f64,
    #[serde(default)]
    pub mu: f64,
    /// Noise level assumed by the estimator, `Q = σ² I`.
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub solver: Solver,
}

fn one() -> f64 {
    1.0
}

impl FitConfig {
    fn rho2_for(&self, rho1: f64, s_cov: &Matrix) -> f64 {
        self.rho2.unwrap_or_else(|| self.rho2_scale * default_rho2(rho1, s_cov))
    }

    fn spec(&self, train: &TimeSeriesData, s_cov: &Matrix) -> Result<ProblemSpec> {
        let rho2 = self.rho2_for(self.rho1, s_cov);
        ProblemSpec::from_series(train, s_cov.clone(), self.sigma, self.rho1, Some(rho2), self.mu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub rho1: Vec<f64>,
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub scheme: ValidationScheme,
    #[serde(default = "default_metric")]
    pub metric: Metric,
}

fn default_metric() -> Metric {
    Metric::NormalizedError
}

/// Suite of continuous-time systems, discretized and rescaled to spectral
/// radius 1/2, each fitted with PALM-cardinality, PALM-ℓ1 and GP-ℓ1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    /// Number of synthetic systems (ignored when `systems_from` is set).
    pub systems: usize,
    pub p_min: usize,
    pub p_max: usize,
    /// Fraction of nonzero off-diagonal couplings in a synthetic system.
    pub density: f64,
    /// Range of `log10` of the synthetic decay rates.
    pub log10_rates: [f64; 2],
    pub coupling_std: f64,
    /// CSV files with continuous-time matrices to use instead.
    pub systems_from: Vec<PathBuf>,
    pub dt: f64,
    /// Target sparsity fractions `α = s/p²`.
    pub alphas: Vec<f64>,
    pub rho1: f64,
    pub rho2_scale: f64,
    pub mu: f64,
    /// Estimator noise level; the data noise is `data.noise_std`.
    pub sigma: f64,
    /// Relative tolerance on the matched nonzero count.
    pub nnz_tolerance: f64,
    pub bisection: BisectionConfig,
    pub palm: PalmConfig,
    pub gp: GpConfig,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            systems: 40,
            p_min: 3,
            p_max: 40,
            density: 0.2,
            log10_rates: [-1.5, 1.0],
            coupling_std: 0.5,
            systems_from: Vec::new(),
            dt: 1.0,
            alphas: vec![0.5, 0.25, 0.125],
            rho1: 1.0,
            rho2_scale: 1.0,
            mu: 0.0,
            sigma: 1.0,
            nnz_tolerance: 0.02,
            bisection: BisectionConfig::default(),
            palm: PalmConfig::default(),
            gp: GpConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub model: Option<ModelSource>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub inputs: InputFiles,
    #[serde(default)]
    pub fit: Option<FitConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub compare: Option<CompareConfig>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    /// Parses a config file. Relative paths are resolved against the
    /// file's directory and every referenced input must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Parse { path: path.display().to_string(), reason: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        for p in [&mut self.inputs.train, &mut self.inputs.test, &mut self.inputs.steady, &mut self.inputs.estimate]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        if let Some(ModelSource::Imported { bundle, a }) = &mut self.model {
            bundle.iter_mut().for_each(fix);
            a.iter_mut().for_each(fix);
        }
        if let Some(c) = &mut self.compare {
            c.systems_from.iter_mut().for_each(fix);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut files: Vec<&PathBuf> =
            [&self.inputs.train, &self.inputs.test, &self.inputs.steady, &self.inputs.estimate]
                .into_iter()
                .flatten()
                .collect();
        match &self.model {
            Some(ModelSource::Sparse { p, nnz, target_radius }) => {
                if *p == 0 || *nnz == 0 || *nnz > p * p || !(*target_radius > 0.0 && *target_radius < 1.0) {
                    return Err(config_err(format!(
                        "sparse model needs p ≥ 1, 1 ≤ nnz ≤ p², radius in (0,1); got p={p}, nnz={nnz}, radius={target_radius}"
                    )));
                }
            }
            Some(ModelSource::Lowrank { p, rank }) => {
                if *rank == 0 || rank > p {
                    return Err(config_err(format!("low-rank model needs 1 ≤ rank ≤ p, got p={p}, rank={rank}")));
                }
            }
            Some(ModelSource::Imported { bundle, a }) => {
                if bundle.is_some() == a.is_some() {
                    return Err(config_err("imported model needs exactly one of `bundle` or `a`"));
                }
                files.extend(bundle.iter());
                files.extend(a.iter());
            }
            None => {}
        }
        for f in files {
            if !f.exists() {
                return Err(config_err(format!("referenced file {} does not exist", f.display())));
            }
        }
        let d = &self.data;
        if d.n < 2 || d.m < 2 || d.steady < 2 || !(d.noise_std > 0.0) {
            return Err(config_err(format!("data sizes must be ≥ 2 and noise_std > 0, got {d:?}")));
        }
        if let Some(fit) = &self.fit {
            if !(fit.rho1 > 0.0) || !(fit.sigma > 0.0) || !(fit.mu >= 0.0) || !(fit.rho2_scale > 0.0) {
                return Err(config_err("fit needs rho1 > 0, sigma > 0, mu ≥ 0, rho2_scale > 0"));
            }
            if fit.rho2.is_some_and(|r| !(r > 0.0)) {
                return Err(config_err("fit.rho2 must be positive"));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.rho1.is_empty() || sweep.sigma.is_empty() {
                return Err(config_err("sweep grids must be nonempty"));
            }
            if sweep.rho1.iter().chain(&sweep.sigma).any(|v| !(*v > 0.0)) {
                return Err(config_err("sweep grid values must be positive"));
            }
        }
        if let Some(c) = &self.compare {
            if c.systems_from.is_empty() && (c.systems == 0 || c.p_min < 2 || c.p_min > c.p_max) {
                return Err(config_err("compare needs systems ≥ 1 and 2 ≤ p_min ≤ p_max"));
            }
            if c.alphas.is_empty() || c.alphas.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
                return Err(config_err("compare.alphas must lie in (0, 1]"));
            }
            if !(c.log10_rates[0] <= c.log10_rates[1]) || !(c.coupling_std >= 0.0) || !(0.0..=1.0).contains(&c.density) {
                return Err(config_err("compare needs log10_rates[0] ≤ log10_rates[1], coupling_std ≥ 0, density in [0, 1]"));
            }
            for f in &c.systems_from {
                if !f.exists() {
                    return Err(config_err(format!("referenced file {} does not exist", f.display())));
                }
            }
        }
        Ok(())
    }

    fn fit_config(&self) -> Result<&FitConfig> {
        self.fit.as_ref().ok_or_else(|| config_err("config has no `fit` section"))
    }
}

/// Training series, test series and steady-state samples.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub train: TimeSeriesData,
    pub test: TimeSeriesData,
    pub steady: SteadyStateData,
}

impl GeneratedData {
    pub fn s_cov(&self) -> Matrix {
        sample_covariance(&self.steady)
    }
}

/// Draws `n` training and `m` test states as consecutive pieces of one
/// trajectory started in steady state, plus `data.steady` samples from an
/// independent trajectory. The model's `Q` drives the steady-state chain;
/// the series use `N(0, noise_std² I)`.
pub fn generate_data(model: &VarModel, data: &DataConfig, seed: u64) -> Result<GeneratedData> {
    let start = sample_steady_state(model, 2, data.burn_in, data.spacing, sub_seed(seed, 0))?;
    let x0: DVector<f64> = start.samples().column(1).into_owned();
    let path = simulate(model, &x0, data.n + data.m, data.noise_std, sub_seed(seed, 1))?;
    let train = path.window(0, data.n)?;
    let test = path.window(data.n, data.m)?;
    let steady = sample_steady_state(model, data.steady, data.burn_in, data.spacing, sub_seed(seed, 2))?;
    Ok(GeneratedData { train, test, steady })
}

fn with_noise(model: VarModel, noise_std: f64) -> Result<VarModel> {
    let p = model.p();
    VarModel::new(model.a().clone(), Matrix::identity(p, p) * (noise_std * noise_std))
}

/// Builds the ground-truth model described by `source`.
pub fn build_model(source: &ModelSource, noise_std: f64, seed: u64) -> Result<(VarModel, ModelMeta)> {
    let (model, meta) = match *source {
        ModelSource::Sparse { p, nnz, target_radius } => {
            let m = generate_sparse_stable(p, nnz, target_radius, seed)?;
            let meta = ModelMeta {
                p,
                seed: Some(seed),
                kind: ModelKind::Sparse,
                nnz: Some(nnz),
                rank: None,
                spectral_radius: m.spectral_radius(),
            };
            (with_noise(m, noise_std)?, meta)
        }
        ModelSource::Lowrank { p, rank } => {
            let m = generate_lowrank_stable(p, rank, seed)?;
            let meta = ModelMeta {
                p,
                seed: Some(seed),
                kind: ModelKind::Lowrank,
                nnz: None,
                rank: Some(rank),
                spectral_radius: m.spectral_radius(),
            };
            (with_noise(m, noise_std)?, meta)
        }
        ModelSource::Imported { ref bundle, ref a } => {
            if let Some(dir) = bundle {
                read_model_bundle(dir)?
            } else {
                let a = read_matrix_file(a.as_ref().expect("validated: one of bundle or a"))?;
                let p = a.nrows();
                let m = VarModel::new(a, Matrix::identity(p, p) * (noise_std * noise_std))?;
                let meta = ModelMeta {
                    p,
                    seed: None,
                    kind: ModelKind::Imported,
                    nnz: Some(count_nonzeros(m.a(), 0.0)),
                    rank: None,
                    spectral_radius: m.spectral_radius(),
                };
                (m, meta)
            }
        }
    };
    Ok((model, meta))
}

/// Outcome of a command; `converged == false` maps to exit code 1.
#[derive(Debug, Clone)]
pub struct CommandOutcome {
    pub converged: bool,
    pub out_dir: PathBuf,
    pub summary: serde_json::Value,
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_series(ts: &TimeSeriesData, path: &Path) -> Result<()> {
    write_matrix_file(ts.states(), path)
}

fn read_series(path: &Path, p: Option<usize>) -> Result<TimeSeriesData> {
    let states = read_matrix_file(path)?;
    if let Some(p) = p {
        if states.nrows() != p {
            return Err(Error::Dimension(format!(
                "{} has {} rows but the model has p = {p} (rows are state components, columns are time)",
                path.display(),
                states.nrows()
            )));
        }
    }
    TimeSeriesData::new(states)
}

/// Writes `A.csv`, `Q.csv`, `train.csv`, `test.csv`, `steady.csv`,
/// `meta.json` and `report.json`.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<CommandOutcome> {
    let source = cfg.model.as_ref().ok_or_else(|| config_err("generate needs a `model` section"))?;
    let (model, meta) = build_model(source, cfg.data.noise_std, cfg.seed)?;
    let data = generate_data(&model, &cfg.data, cfg.seed)?;
    let out = &cfg.out_dir;
    prepare_out_dir(out)?;
    write_model_bundle(&model, &meta, out)?;
    write_series(&data.train, &out.join("train.csv"))?;
    write_series(&data.test, &out.join("test.csv"))?;
    write_matrix_file(data.steady.samples(), &out.join("steady.csv"))?;
    let summary = json!({
        "command": "generate",
        "meta": meta,
        "shapes": {
            "A": [model.p(), model.p()],
            "train": [data.train.p(), data.train.len()],
            "test": [data.test.p(), data.test.len()],
            "steady": [data.steady.samples().nrows(), data.steady.len()],
        },
        "config": cfg,
    });
    write_json(&summary, &out.join("report.json"))?;
    Ok(CommandOutcome { converged: true, out_dir: out.clone(), summary })
}

/// Training data, steady-state samples and (optionally) test data, from the
/// input files when given and otherwise generated from `model`.
pub struct LoadedData {
    pub train: TimeSeriesData,
    pub test: Option<TimeSeriesData>,
    pub s_cov: Matrix,
    pub truth: Option<VarModel>,
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<LoadedData> {
    if let Some(train_path) = &cfg.inputs.train {
        let train = read_series(train_path, None)?;
        let p = train.p();
        let steady_path =
            cfg.inputs.steady.as_ref().ok_or_else(|| config_err("inputs.train given without inputs.steady"))?;
        let steady = SteadyStateData::new(read_matrix_file(steady_path)?)?;
        if steady.samples().nrows() != p {
            return Err(Error::Dimension(format!("steady-state samples have {} rows, train has {p}", steady.samples().nrows())));
        }
        let test = cfg.inputs.test.as_ref().map(|t| read_series(t, Some(p))).transpose()?;
        return Ok(LoadedData { train, test, s_cov: sample_covariance(&steady), truth: None });
    }
    let source = cfg.model.as_ref().ok_or_else(|| config_err("need either inputs.train or a `model` section"))?;
    let (model, _) = build_model(source, cfg.data.noise_std, cfg.seed)?;
    let data = generate_data(&model, &cfg.data, cfg.seed)?;
    let s_cov = data.s_cov();
    Ok(LoadedData { train: data.train, test: Some(data.test), s_cov, truth: Some(model) })
}

fn solve_summary(report: &SolveReport, constraint: &Constraint, solver: &Solver) -> serde_json::Value {
    json!({
        "status": report.status,
        "iters": report.iterations,
        "final_phi": report.final_objective,
        "e_x": report.e_x,
        "e_y": report.e_y,
        "e_xy": report.e_xy,
        "wall_time_s": report.wall_time.as_secs_f64(),
        "projections": report.projections,
        "delta_min": report.delta_min,
        "violation": report.violation,
        "nnz": count_nonzeros(&report.estimate, 0.0),
        "numerical_rank": numerical_rank(&report.estimate),
        "constraint": constraint,
        "solver": solver.name(),
    })
}

fn write_solve_outputs(report: &SolveReport, out: &Path) -> Result<()> {
    write_matrix_file(&report.estimate, &out.join("estimate.csv"))?;
    report.trace.write_csv(fs::File::create(out.join("trace.csv"))?)
}

/// Writes `estimate.csv`, `trace.csv` and `report.json`; the report is
/// written even when the solver stops without converging.
pub fn cmd_fit(cfg: &ExperimentConfig) -> Result<CommandOutcome> {
    let fit = cfg.fit_config()?;
    let data = load_data(cfg)?;
    let spec = fit.spec(&data.train, &data.s_cov)?;
    let report = fit.solver.solve(&spec, &fit.constraint)?;
    let out = &cfg.out_dir;
    prepare_out_dir(out)?;
    write_solve_outputs(&report, out)?;
    let mut summary = solve_summary(&report, &fit.constraint, &fit.solver);
    summary["command"] = json!("fit");
    summary["rho2"] = json!(spec.rho2());
    if let Some(test) = &data.test {
        summary["evaluation"] = json!(evaluate(&report.estimate, test)?);
    }
    if let Some(truth) = &data.truth {
        summary["truth_evaluation"] = data.test.as_ref().map(|t| evaluate(truth.a(), t)).transpose()?.map_or(json!(null), |e| json!(e));
    }
    summary["config"] = json!(cfg);
    write_json(&summary, &out.join("report.json"))?;
    Ok(CommandOutcome { converged: report.status.is_converged(), out_dir: out.clone(), summary })
}

/// Metrics of a stored estimate on a stored test series.
pub fn cmd_eval(estimate: &Path, test: &Path, out: Option<&Path>) -> Result<(EvalResult, serde_json::Value)> {
    let a = read_matrix_file(estimate)?;
    let ts = read_series(test, Some(a.nrows()))?;
    if !a.is_square() {
        return Err(Error::Dimension(format!("estimate is {}×{}, expected square", a.nrows(), a.ncols())));
    }
    let r = evaluate(&a, &ts)?;
    let summary = json!({
        "normalized_error": r.normalized_error,
        "cosine_score": r.cosine_score,
        "m": r.test_length,
        "skipped_terms": r.skipped_terms,
    });
    if let Some(dir) = out {
        prepare_out_dir(dir)?;
        write_json(&summary, &dir.join("metrics.json"))?;
    }
    Ok((r, summary))
}

/// Cross-validates `(ρ₁, σ)` on the training data, refits on all of it
/// with the winner, and evaluates on the test data when present.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<CommandOutcome> {
    let fit = cfg.fit_config()?;
    let sweep = cfg.sweep.as_ref().ok_or_else(|| config_err("sweep needs a `sweep` section"))?;
    let data = load_data(cfg)?;
    let template = FitTemplate {
        constraint: fit.constraint,
        solver: fit.solver.clone(),
        rho2: fit.rho2,
        rho2_scale: fit.rho2_scale,
        mu: fit.mu,
    };
    let cv = cross_validate(&data.train, &data.s_cov, &sweep.rho1, &sweep.sigma, &sweep.scheme, sweep.metric, &template)?;
    let out = &cfg.out_dir;
    prepare_out_dir(out)?;
    cv.write_csv(fs::File::create(out.join("cv_scores.csv"))?)?;

    let best = FitConfig { rho1: cv.best_rho1, sigma: cv.best_sigma, ..fit.clone() };
    let spec = best.spec(&data.train, &data.s_cov)?;
    let report = best.solver.solve(&spec, &best.constraint)?;
    write_solve_outputs(&report, out)?;
    let mut summary = solve_summary(&report, &best.constraint, &best.solver);
    summary["command"] = json!("sweep");
    summary["best"] = json!({ "rho1": cv.best_rho1, "sigma": cv.best_sigma, "metric": cv.metric, "value": cv.best_value });
    if let Some(test) = &data.test {
        summary["evaluation"] = json!(evaluate(&report.estimate, test)?);
    }
    summary["config"] = json!(cfg);
    write_json(&summary, &out.join("report.json"))?;
    Ok(CommandOutcome { converged: report.status.is_converged(), out_dir: out.clone(), summary })
}

/// Methods compared per system, in tie-break order.
pub const COMPARE_METHODS: [&str; 3] = ["palm_card", "palm_l1", "gp_l1"];

/// One method's result on one system at one sparsity level.
#[derive(Debug, Clone, Serialize)]
pub struct MethodResult {
    pub system: usize,
    pub p: usize,
    pub alpha: f64,
    pub target_nnz: usize,
    pub method: &'static str,
    pub normalized_error: f64,
    pub cosine_score: f64,
    pub nnz: usize,
    pub l1_bound: Option<f64>,
    pub status: String,
    pub iterations: usize,
    pub projections: usize,
    /// Metrics of the true transition matrix on the same test series.
    pub truth_normalized_error: f64,
    pub truth_cosine_score: f64,
}

/// Win counts per sparsity level and metric, in [`COMPARE_METHODS`] order.
#[derive(Debug, Clone, Serialize)]
pub struct WinTally {
    pub alpha: f64,
    pub metric: Metric,
    pub wins: [usize; 3],
    pub solved: usize,
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub results: Vec<MethodResult>,
    pub failures: Vec<(usize, f64, String)>,
    pub tallies: Vec<WinTally>,
}

impl CompareOutcome {
    pub fn tally(&self, alpha: f64, metric: Metric) -> Option<&WinTally> {
        self.tallies.iter().find(|t| t.alpha == alpha && t.metric == metric)
    }
}

/// Random stable continuous-time matrix with time scales spread over several
/// decades: decay rates `10^u` with `u` uniform on `log10_rates` on the
/// diagonal, plus Gaussian couplings of standard deviation `coupling_std` on
/// a `density` fraction of the off-diagonal entries. If the couplings push an
/// eigenvalue into the right half plane the whole matrix is shifted left.
pub fn synthetic_continuous_system(
    p: usize,
    density: f64,
    log10_rates: [f64; 2],
    coupling_std: f64,
    seed: u64,
) -> Result<Matrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [lo, hi] = log10_rates;
    let rates: Vec<f64> = (0..p).map(|_| 10f64.powf(lo + (hi - lo) * rng.random::<f64>())).collect();
    let mut a_c = Matrix::from_fn(p, p, |i, j| {
        if i == j {
            -rates[i]
        } else if rng.random::<f64>() < density {
            coupling_std * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        }
    });
    // spectral abscissa via the unit-time exponential
    let tau = spectral_radius(&discretize(&a_c, 1.0)?);
    let floor = 10f64.powf(lo);
    if tau.ln() > -floor {
        let shift = tau.ln() + floor;
        for i in 0..p {
            a_c[(i, i)] -= shift;
        }
    }
    Ok(a_c)
}

fn compare_sizes(p: usize) -> DataConfig {
    let n = (p / 2).max(2);
    DataConfig { n, m: p.max(2), steady: (5 * n).max(2), ..DataConfig::default() }
}

/// Winner per metric in [`COMPARE_METHODS`] order; ties go to the earlier
/// method.
pub fn winners(rows: &[&MethodResult]) -> [usize; 2] {
    let mut best = [0usize; 2];
    for (i, r) in rows.iter().enumerate().skip(1) {
        if Metric::NormalizedError.better(r.normalized_error, rows[best[0]].normalized_error) {
            best[0] = i;
        }
        if Metric::CosineScore.better(r.cosine_score, rows[best[1]].cosine_score) {
            best[1] = i;
        }
    }
    best
}

fn run_compare_system(
    cc: &CompareConfig,
    data_cfg: &DataConfig,
    system: usize,
    a_c: &Matrix,
    seed: u64,
) -> Result<Vec<(f64, Result<Vec<MethodResult>>)>> {
    let a = rescale_to_stable(&discretize(a_c, cc.dt)?, 2.0)?;
    let p = a.nrows();
    let model = VarModel::new(a, Matrix::identity(p, p) * (data_cfg.noise_std * data_cfg.noise_std))?;
    let sizes = DataConfig { noise_std: data_cfg.noise_std, burn_in: data_cfg.burn_in, spacing: data_cfg.spacing, ..compare_sizes(p) };
    let data = generate_data(&model, &sizes, seed)?;
    let truth = evaluate(model.a(), &data.test)?;
    let s_cov = data.s_cov();
    let rho2 = cc.rho2_scale * default_rho2(cc.rho1, &s_cov);
    let spec = ProblemSpec::from_series(&data.train, s_cov, cc.sigma, cc.rho1, Some(rho2), cc.mu)?;

    let mut per_alpha = Vec::new();
    for &alpha in &cc.alphas {
        let target = ((alpha * (p * p) as f64).round() as usize).max(1);
        let run = || -> Result<Vec<MethodResult>> {
            let row = |method, report: &SolveReport, l1_bound| -> Result<MethodResult> {
                let e = evaluate(&report.estimate, &data.test)?;
                Ok(MethodResult {
                    system,
                    p,
                    alpha,
                    target_nnz: target,
                    method,
                    normalized_error: e.normalized_error,
                    cosine_score: e.cosine_score,
                    nnz: count_nonzeros(&report.estimate, ZERO_TOL),
                    l1_bound,
                    status: format!("{:?}", report.status).to_lowercase(),
                    iterations: report.iterations,
                    projections: report.projections,
                    truth_normalized_error: truth.normalized_error,
                    truth_cosine_score: truth.cosine_score,
                })
            };
            let card = Solver::Palm(cc.palm.clone()).solve(&spec, &Constraint::Cardinality(target))?;
            let bis_cfg = BisectionConfig {
                tol_nnz: (cc.nnz_tolerance * target as f64).floor() as usize,
                ..cc.bisection
            };
            // the unconstrained fit bounds the useful ℓ1 radius from above
            let l_up = crate::linalg::l1_norm(&crate::palm::ridge_start(&spec)).max(1e-6) * 2.0;
            let bis = bisect_l1_threshold(&spec, target, (l_up * 1e-3, l_up), &bis_cfg, &Solver::Palm(cc.palm.clone()))?;
            let gp = Solver::Gp(cc.gp.clone()).solve(&spec, &Constraint::L1Ball(bis.l))?;
            Ok(vec![row("palm_card", &card, None)?, row("palm_l1", &bis.report, Some(bis.l))?, row("gp_l1", &gp, Some(bis.l))?])
        };
        per_alpha.push((alpha, run()));
    }
    Ok(per_alpha)
}

/// Runs the comparison suite and tallies wins per sparsity level and metric.
pub fn run_compare(cc: &CompareConfig, data_cfg: &DataConfig, seed: u64) -> Result<CompareOutcome> {
    let systems: Vec<Matrix> = if cc.systems_from.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 10));
        (0..cc.systems)
            .map(|i| {
                let p = rng.random_range(cc.p_min..=cc.p_max);
                synthetic_continuous_system(p, cc.density, cc.log10_rates, cc.coupling_std, sub_seed(seed, 100 + i as u64))
            })
            .collect::<Result<_>>()?
    } else {
        cc.systems_from.iter().map(|f| read_matrix_file(f)).collect::<Result<_>>()?
    };

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (i, a_c) in systems.iter().enumerate() {
        log::info!("system {}/{} (p = {})", i + 1, systems.len(), a_c.nrows());
        match run_compare_system(cc, data_cfg, i, a_c, sub_seed(seed, 1000 + i as u64)) {
            Ok(per_alpha) => {
                for (alpha, r) in per_alpha {
                    match r {
                        Ok(rows) => results.extend(rows),
                        Err(e) => {
                            log::warn!("system {i}, alpha {alpha}: {e}");
                            failures.push((i, alpha, e.to_string()));
                        }
                    }
                }
            }
            Err(e) => {
                log::warn!("system {i}: {e}");
                for &alpha in &cc.alphas {
                    failures.push((i, alpha, e.to_string()));
                }
            }
        }
    }

    let mut tallies = Vec::new();
    for &alpha in &cc.alphas {
        let mut wins = [[0usize; 3]; 2];
        let mut solved = 0;
        for chunk in results.chunks(3).filter(|c| c[0].alpha == alpha) {
            let rows: Vec<&MethodResult> = chunk.iter().collect();
            let w = winners(&rows);
            wins[0][w[0]] += 1;
            wins[1][w[1]] += 1;
            solved += 1;
        }
        tallies.push(WinTally { alpha, metric: Metric::NormalizedError, wins: wins[0], solved });
        tallies.push(WinTally { alpha, metric: Metric::CosineScore, wins: wins[1], solved });
    }
    Ok(CompareOutcome { results, failures, tallies })
}

/// Writes `compare_results.csv`, `compare_summary.csv` and `report.json`.
pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<CommandOutcome> {
    let cc = cfg.compare.clone().unwrap_or_default();
    let started = Instant::now();
    let outcome = run_compare(&cc, &cfg.data, cfg.seed)?;
    let out = &cfg.out_dir;
    prepare_out_dir(out)?;

    let mut w = csv::Writer::from_path(out.join("compare_results.csv"))?;
    w.write_record([
        "system", "p", "alpha", "target_nnz", "method", "normalized_error", "cosine_score", "nnz", "l1_bound", "status",
        "iterations", "projections", "truth_normalized_error", "truth_cosine_score",
    ])?;
    for r in &outcome.results {
        w.write_record([
            r.system.to_string(),
            r.p.to_string(),
            fmt_real(r.alpha),
            r.target_nnz.to_string(),
            r.method.to_string(),
            fmt_real(r.normalized_error),
            fmt_real(r.cosine_score),
            r.nnz.to_string(),
            r.l1_bound.map(fmt_real).unwrap_or_default(),
            r.status.clone(),
            r.iterations.to_string(),
            r.projections.to_string(),
            fmt_real(r.truth_normalized_error),
            fmt_real(r.truth_cosine_score),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("compare_summary.csv"))?;
    w.write_record(["alpha", "metric", "palm_card", "palm_l1", "gp_l1", "solved"])?;
    for t in &outcome.tallies {
        w.write_record([
            fmt_real(t.alpha),
            t.metric.name().to_string(),
            t.wins[0].to_string(),
            t.wins[1].to_string(),
            t.wins[2].to_string(),
            t.solved.to_string(),
        ])?;
    }
    w.flush()?;

    let failures: Vec<_> =
        outcome.failures.iter().map(|(s, a, e)| json!({"system": s, "alpha": a, "error": e})).collect();
    let summary = json!({
        "command": "compare",
        "tallies": outcome.tallies,
        "failures": failures,
        "wall_time_s": started.elapsed().as_secs_f64(),
        "config": cfg,
    });
    write_json(&summary, &out.join("report.json"))?;
    Ok(CommandOutcome { converged: outcome.failures.is_empty(), out_dir: out.clone(), summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"seed": 1}"#).is_ok());
        assert!(ExperimentConfig::from_json(r#"{"seed": 1, "sed": 2}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"data": {"n": 5, "mm": 3}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"model": {"kind": "sparse", "p": 3, "nnz": 4, "x": 1}}"#).is_err());
    }

    #[test]
    fn missing_input_files_are_rejected() {
        let r = ExperimentConfig::from_json(r#"{"inputs": {"train": "/nonexistent/train.csv"}}"#);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn invalid_generator_params_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"model": {"kind": "sparse", "p": 3, "nnz": 10}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"model": {"kind": "lowrank", "p": 3, "rank": 4}}"#).is_err());
    }

    #[test]
    fn winners_break_ties_by_method_order() {
        let mk = |method, ne, cs| MethodResult {
            system: 0,
            p: 3,
            alpha: 0.5,
            target_nnz: 4,
            method,
            normalized_error: ne,
            cosine_score: cs,
            nnz: 4,
            l1_bound: None,
            status: "converged".into(),
            iterations: 1,
            projections: 1,
            truth_normalized_error: 0.3,
            truth_cosine_score: 0.9,
        };
        let rows = [mk("palm_card", 0.5, 0.7), mk("palm_l1", 0.5, 0.9), mk("gp_l1", 0.4, 0.9)];
        let refs: Vec<&MethodResult> = rows.iter().collect();
        assert_eq!(winners(&refs), [2, 1]);
    }

    #[test]
    fn sub_seeds_differ() {
        let s: Vec<u64> = (0..5).map(|k| sub_seed(42, k)).collect();
        for i in 0..5 {
            for j in 0..i {
                assert_ne!(s[i], s[j]);
            }
        }
    }
}

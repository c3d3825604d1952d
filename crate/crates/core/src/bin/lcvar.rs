//! Command-line front end.
//!
//! Exit codes: 0 success, 1 solver did not converge (outputs still written),
//! 2 configuration or I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lcvar::experiment::{cmd_compare, cmd_eval, cmd_fit, cmd_generate, cmd_sweep, CommandOutcome, ExperimentConfig};
use lcvar::Error;

#[derive(Parser)]
#[command(name = "lcvar", version, about = "Sparse and low-rank VAR(1) identification with a Lyapunov penalty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a ground-truth model and train/test/steady-state data.
    Generate(Common),
    /// Fit a transition matrix.
    Fit(Common),
    /// Evaluate a stored estimate on a stored test series.
    Eval {
        /// Config whose `inputs.estimate` and `inputs.test` are used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        estimate: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare PALM-cardinality, PALM-ℓ1 and GP-ℓ1 on a suite of systems.
    Compare(Common),
    /// Cross-validate ρ₁ and σ, then refit with the best pair.
    Sweep(Common),
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn finish(result: Result<CommandOutcome, Error>) -> ExitCode {
    match result {
        Ok(outcome) => {
            println!("{}", serde_json::to_string_pretty(&outcome.summary).unwrap_or_default());
            if outcome.converged {
                ExitCode::SUCCESS
            } else {
                eprintln!("solver did not converge; outputs written to {}", outcome.out_dir.display());
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Generate(c) => finish(load(&c).and_then(|cfg| cmd_generate(&cfg))),
        Command::Fit(c) => finish(load(&c).and_then(|cfg| cmd_fit(&cfg))),
        Command::Compare(c) => finish(load(&c).and_then(|cfg| cmd_compare(&cfg))),
        Command::Sweep(c) => finish(load(&c).and_then(|cfg| cmd_sweep(&cfg))),
        Command::Eval { config, estimate, test, out } => {
            let paths = (|| -> Result<_, Error> {
                let cfg = config.as_deref().map(ExperimentConfig::load).transpose()?;
                let inputs = cfg.as_ref().map(|c| c.inputs.clone()).unwrap_or_default();
                let estimate = estimate
                    .or(inputs.estimate)
                    .ok_or_else(|| Error::Config("eval needs --estimate or inputs.estimate".into()))?;
                let test =
                    test.or(inputs.test).ok_or_else(|| Error::Config("eval needs --test or inputs.test".into()))?;
                let out = out.or_else(|| cfg.map(|c| c.out_dir));
                Ok((estimate, test, out))
            })();
            match paths.and_then(|(estimate, test, out)| cmd_eval(&estimate, &test, out.as_deref())) {
                Ok((_, summary)) => {
                    println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}

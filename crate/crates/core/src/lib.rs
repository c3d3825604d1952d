//! Identification of low-complexity (sparse or low-rank) vector
//! autoregressive models from short time series plus abundant steady-state
//! samples.
//!
//! The estimator minimizes a least-squares fit regularized by a Lyapunov
//! penalty, subject to a cardinality, rank, ℓ1-ball or nuclear-ball
//! constraint on the transition matrix. The nonconvex problem is split into
//! two blocks and solved with proximal alternating linearized minimization
//! ([`palm`]); a projected-gradient baseline ([`gp`]) handles the convex
//! constraints for comparison.
//!
//! Matrices are dense `nalgebra::DMatrix<f64>` throughout.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod gp;
pub mod io;
pub mod linalg;
pub mod model_data;
pub mod objective;
pub mod palm;
pub mod proximal;
pub mod report;

pub use error::{Error, Result};
pub use evaluation::{
    bisect_l1_threshold, cosine_score, cross_validate, evaluate, normalized_error,
    BisectionConfig, BisectionOutcome, CvOutcome, EvalResult, FitTemplate, L1Solver, Metric,
    Solver, ValidationScheme,
};
pub use gp::{gp_solve, projection_count, GpConfig};
pub use model_data::{
    discretize, generate_lowrank_stable, generate_sparse_stable, rescale_to_stable,
    sample_covariance, sample_steady_state, simulate, solve_lyapunov, ModelKind,
    SteadyStateData, TimeSeriesData, VarModel,
};
pub use objective::ProblemSpec;
pub use palm::{palm_solve, sufficient_decrease_margin, PalmConfig};
pub use proximal::Constraint;
pub use report::{IterateState, SolveReport, SolveStatus, SolverTrace};

/// Dense real matrix used for every quantity in the crate.
pub type Matrix = nalgebra::DMatrix<f64>;

//! Solver outputs shared by PALM and gradient projection.

use std::io::Write;
use std::time::Duration;

use serde::Serialize;

use crate::{Matrix, Result};

/// One recorded PALM iterate (the matrices themselves are not kept).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterateState {
    pub iter: usize,
    pub phi: f64,
    /// `‖X^{k+1} − X^k‖_F`; zero for the initial record.
    pub e_x: f64,
    /// `‖Y^{k+1} − Y^k‖_F`; zero for the initial record.
    pub e_y: f64,
    /// `‖X^k − Y^k‖_F` at the recorded iterate.
    pub e_xy: f64,
    pub c_k: f64,
    pub d_k: f64,
}

/// One recorded gradient-projection iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GpRecord {
    pub iter: usize,
    pub f_value: f64,
    pub step_size: f64,
    pub backtracks: usize,
    pub projections_cum: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverTrace {
    Palm(Vec<IterateState>),
    Gp(Vec<GpRecord>),
}

impl SolverTrace {
    pub fn len(&self) -> usize {
        match self {
            SolverTrace::Palm(t) => t.len(),
            SolverTrace::Gp(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes the trace as CSV with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        match self {
            SolverTrace::Palm(rows) => {
                w.write_record(["iter", "phi", "e_x", "e_y", "e_xy", "c_k", "d_k"])?;
                for r in rows {
                    w.write_record([
                        r.iter.to_string(),
                        fmt_real(r.phi),
                        fmt_real(r.e_x),
                        fmt_real(r.e_y),
                        fmt_real(r.e_xy),
                        fmt_real(r.c_k),
                        fmt_real(r.d_k),
                    ])?;
                }
            }
            SolverTrace::Gp(rows) => {
                w.write_record(["iter", "f_value", "step_size", "backtracks", "projections_cum"])?;
                for r in rows {
                    w.write_record([
                        r.iter.to_string(),
                        fmt_real(r.f_value),
                        fmt_real(r.step_size),
                        r.backtracks.to_string(),
                        r.projections_cum.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// 17 significant digits, enough for an exact `f64` round trip.
pub(crate) fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    MonotonicityViolation,
    BacktrackingExhausted,
}

impl SolveStatus {
    pub fn is_converged(&self) -> bool {
        matches!(self, SolveStatus::Converged)
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Final estimate: the Y block for PALM, the iterate for GP. Always
    /// feasible for the constraint.
    pub estimate: Matrix,
    /// Final X block (PALM) or the same iterate (GP).
    pub x_block: Matrix,
    pub status: SolveStatus,
    /// Number of update steps performed.
    pub iterations: usize,
    /// `Φ` (PALM) or `F` (GP) at the final iterate.
    pub final_objective: f64,
    pub e_x: f64,
    pub e_y: f64,
    pub e_xy: f64,
    pub trace: SolverTrace,
    /// Smallest observed sufficient-decrease margin (PALM only).
    pub delta_min: Option<f64>,
    /// Offending step when the status is a monotonicity violation.
    pub violation: Option<IterateState>,
    /// Projections onto the constraint set, including the initial one.
    pub projections: usize,
    pub wall_time: Duration,
}

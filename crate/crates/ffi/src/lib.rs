//! C interface to the lcvar solvers.
//!
//! Matrices cross the boundary as row-major `double` buffers. Problems and
//! reports are opaque handles owned by the caller and released with the
//! matching `_free` function. Every fallible call returns an
//! [`LcvarStatus`]; the message for the most recent failure on the calling
//! thread is available from [`lcvar_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lcvar::{Constraint, Error, GpConfig, Matrix, PalmConfig, ProblemSpec, SolveReport, SolveStatus, TimeSeriesData};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcvarStatus {
    Ok = 0,
    NullPointer = 1,
    Dimension = 2,
    InvalidArgument = 3,
    Numerical = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcvarConstraintKind {
    Cardinality = 0,
    Rank = 1,
    L1Ball = 2,
    NuclearBall = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcvarSolveStatus {
    Converged = 0,
    MaxIters = 1,
    MonotonicityViolation = 2,
    BacktrackingExhausted = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LcvarPalmOptions {
    pub gamma1: f64,
    pub gamma2: f64,
    pub max_iters: usize,
    pub tol_step: f64,
    /// Nonzero to stop on a failed sufficient-decrease check.
    pub assert_monotone: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LcvarGpOptions {
    pub armijo_sigma: f64,
    pub armijo_beta: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
    pub max_iters: usize,
    pub tol_step: f64,
}

/// Opaque problem data.
pub struct LcvarProblem {
    spec: ProblemSpec,
}

/// Opaque solver result.
pub struct LcvarReport {
    report: SolveReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LcvarStatus {
    match e {
        Error::Dimension(_) => LcvarStatus::Dimension,
        Error::NonFinite { .. } | Error::Numerical(_) | Error::Unstable(_) | Error::Bracket(_) => {
            LcvarStatus::Numerical
        }
        _ => LcvarStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (LcvarStatus, String)>) -> LcvarStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LcvarStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LcvarStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (LcvarStatus, String) {
    (status_of(&e), e.to_string())
}

fn null_err(name: &str) -> (LcvarStatus, String) {
    (LcvarStatus::NullPointer, format!("{name} is null"))
}

/// # Safety
/// `data` must be null or point to `rows * cols` readable doubles.
unsafe fn read_matrix(data: *const f64, rows: usize, cols: usize, name: &str) -> Result<Matrix, (LcvarStatus, String)> {
    if data.is_null() {
        return Err(null_err(name));
    }
    let len = rows.checked_mul(cols).ok_or((LcvarStatus::Dimension, format!("{name} is too large")))?;
    let slice = std::slice::from_raw_parts(data, len);
    Ok(Matrix::from_row_slice(rows, cols, slice))
}

/// # Safety
/// `out` must be null or point to `len` writable doubles.
unsafe fn write_matrix(m: &Matrix, out: *mut f64, len: usize) -> Result<(), (LcvarStatus, String)> {
    if out.is_null() {
        return Err(null_err("output buffer"));
    }
    let need = m.nrows() * m.ncols();
    if len < need {
        return Err((LcvarStatus::BufferTooSmall, format!("buffer holds {len} values, need {need}")));
    }
    let dst = std::slice::from_raw_parts_mut(out, need);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dst[i * m.ncols() + j] = m[(i, j)];
        }
    }
    Ok(())
}

fn constraint(kind: LcvarConstraintKind, bound: f64) -> Result<Constraint, (LcvarStatus, String)> {
    let count = || {
        if bound >= 1.0 && bound.fract() == 0.0 && bound <= usize::MAX as f64 {
            Ok(bound as usize)
        } else {
            Err((LcvarStatus::InvalidArgument, format!("bound {bound} is not a positive integer")))
        }
    };
    Ok(match kind {
        LcvarConstraintKind::Cardinality => Constraint::Cardinality(count()?),
        LcvarConstraintKind::Rank => Constraint::Rank(count()?),
        LcvarConstraintKind::L1Ball => Constraint::L1Ball(bound),
        LcvarConstraintKind::NuclearBall => Constraint::NuclearBall(bound),
    })
}

/// Message describing the last failed call on this thread, or null. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lcvar_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn lcvar_palm_options_default() -> LcvarPalmOptions {
    let d = PalmConfig::default();
    LcvarPalmOptions {
        gamma1: d.gamma1,
        gamma2: d.gamma2,
        max_iters: d.max_iters,
        tol_step: d.tol_step,
        assert_monotone: d.assert_monotone as i32,
    }
}

#[no_mangle]
pub extern "C" fn lcvar_gp_options_default() -> LcvarGpOptions {
    let d = GpConfig::default();
    LcvarGpOptions {
        armijo_sigma: d.armijo_sigma,
        armijo_beta: d.armijo_beta,
        initial_step: d.initial_step,
        max_backtracks: d.max_backtracks,
        max_iters: d.max_iters,
        tol_step: d.tol_step,
    }
}

/// Creates a problem from `c`, `d` (`p × transitions`) and `s`, `q`
/// (`p × p`), all row-major.
///
/// # Safety
/// Each matrix pointer must reference a buffer of the stated size and `out`
/// must be a valid place to store the handle.
#[no_mangle]
pub unsafe extern "C" fn lcvar_problem_new(
    p: usize,
    transitions: usize,
    c: *const f64,
    d: *const f64,
    s: *const f64,
    q: *const f64,
    rho1: f64,
    rho2: f64,
    mu: f64,
    out: *mut *mut LcvarProblem,
) -> LcvarStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_err("out"));
        }
        *out = ptr::null_mut();
        if p == 0 || transitions == 0 {
            return Err((LcvarStatus::Dimension, "p and transitions must be positive".into()));
        }
        let spec = ProblemSpec::new(
            read_matrix(c, p, transitions, "c")?,
            read_matrix(d, p, transitions, "d")?,
            read_matrix(s, p, p, "s")?,
            read_matrix(q, p, p, "q")?,
            rho1,
            rho2,
            mu,
        )
        .map_err(lib_err)?;
        *out = Box::into_raw(Box::new(LcvarProblem { spec }));
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a handle from [`lcvar_problem_new`] not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn lcvar_problem_free(problem: *mut LcvarProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// `problem` must be a live problem handle; `options` may be null for the
/// defaults; `out` must be a valid place to store the report handle.
#[no_mangle]
pub unsafe extern "C" fn lcvar_palm_solve(
    problem: *const LcvarProblem,
    kind: LcvarConstraintKind,
    bound: f64,
    options: *const LcvarPalmOptions,
    out: *mut *mut LcvarReport,
) -> LcvarStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_err("out"));
        }
        *out = ptr::null_mut();
        let problem = problem.as_ref().ok_or_else(|| null_err("problem"))?;
        let mut cfg = PalmConfig::default();
        if let Some(o) = options.as_ref() {
            cfg.gamma1 = o.gamma1;
            cfg.gamma2 = o.gamma2;
            cfg.max_iters = o.max_iters;
            cfg.tol_step = o.tol_step;
            cfg.assert_monotone = o.assert_monotone != 0;
        }
        let report = lcvar::palm_solve(&problem.spec, &constraint(kind, bound)?, None, &cfg).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(LcvarReport { report }));
        Ok(())
    })
}

/// Gradient projection; only the ℓ1 and nuclear-norm balls are accepted.
///
/// # Safety
/// Same contract as [`lcvar_palm_solve`].
#[no_mangle]
pub unsafe extern "C" fn lcvar_gp_solve(
    problem: *const LcvarProblem,
    kind: LcvarConstraintKind,
    bound: f64,
    options: *const LcvarGpOptions,
    out: *mut *mut LcvarReport,
) -> LcvarStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_err("out"));
        }
        *out = ptr::null_mut();
        let problem = problem.as_ref().ok_or_else(|| null_err("problem"))?;
        let mut cfg = GpConfig::default();
        if let Some(o) = options.as_ref() {
            cfg.armijo_sigma = o.armijo_sigma;
            cfg.armijo_beta = o.armijo_beta;
            cfg.initial_step = o.initial_step;
            cfg.max_backtracks = o.max_backtracks;
            cfg.max_iters = o.max_iters;
            cfg.tol_step = o.tol_step;
        }
        let report = lcvar::gp_solve(&problem.spec, &constraint(kind, bound)?, None, &cfg).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(LcvarReport { report }));
        Ok(())
    })
}

/// # Safety
/// `report` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn lcvar_report_free(report: *mut LcvarReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Dimension `p` of the estimate, or 0 for a null handle.
///
/// # Safety
/// `report` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn lcvar_report_dim(report: *const LcvarReport) -> usize {
    report.as_ref().map_or(0, |r| r.report.estimate.nrows())
}

/// Copies the `p × p` estimate into `out` (row-major, `len ≥ p²`).
///
/// # Safety
/// `report` must be a live report handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lcvar_report_estimate(report: *const LcvarReport, out: *mut f64, len: usize) -> LcvarStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null_err("report"))?;
        write_matrix(&r.report.estimate, out, len)
    })
}

/// # Safety
/// `report` must be a live report handle.
#[no_mangle]
pub unsafe extern "C" fn lcvar_report_status(report: *const LcvarReport, out: *mut LcvarSolveStatus) -> LcvarStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null_err("report"))?;
        let out = out.as_mut().ok_or_else(|| null_err("out"))?;
        *out = match r.report.status {
            SolveStatus::Converged => LcvarSolveStatus::Converged,
            SolveStatus::MaxIters => LcvarSolveStatus::MaxIters,
            SolveStatus::MonotonicityViolation => LcvarSolveStatus::MonotonicityViolation,
            SolveStatus::BacktrackingExhausted => LcvarSolveStatus::BacktrackingExhausted,
        };
        Ok(())
    })
}

/// Iteration count, final objective, projection count and the last step
/// sizes. Any output pointer may be null.
///
/// # Safety
/// `report` must be a live report handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn lcvar_report_summary(
    report: *const LcvarReport,
    iterations: *mut usize,
    objective: *mut f64,
    projections: *mut usize,
    e_x: *mut f64,
    e_y: *mut f64,
    e_xy: *mut f64,
) -> LcvarStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null_err("report"))?.report;
        if let Some(v) = iterations.as_mut() {
            *v = r.iterations;
        }
        if let Some(v) = objective.as_mut() {
            *v = r.final_objective;
        }
        if let Some(v) = projections.as_mut() {
            *v = r.projections;
        }
        if let Some(v) = e_x.as_mut() {
            *v = r.e_x;
        }
        if let Some(v) = e_y.as_mut() {
            *v = r.e_y;
        }
        if let Some(v) = e_xy.as_mut() {
            *v = r.e_xy;
        }
        Ok(())
    })
}

/// Projects the row-major `p × p` matrix `v` onto the constraint set.
/// `v` and `out` may alias.
///
/// # Safety
/// `v` and `out` must each reference `p²` doubles.
#[no_mangle]
pub unsafe extern "C" fn lcvar_project(
    kind: LcvarConstraintKind,
    bound: f64,
    p: usize,
    v: *const f64,
    out: *mut f64,
) -> LcvarStatus {
    guard(|| {
        let c = constraint(kind, bound)?;
        c.validate(p).map_err(lib_err)?;
        let m = read_matrix(v, p, p, "v")?;
        write_matrix(&c.project(&m), out, p * p)
    })
}

/// Normalized error and cosine score of `a` (`p × p`) on the test series
/// `states` (`p × m`, one column per time step), both row-major.
///
/// # Safety
/// Buffers must have the stated sizes; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn lcvar_evaluate(
    p: usize,
    a: *const f64,
    m: usize,
    states: *const f64,
    normalized_error: *mut f64,
    cosine_score: *mut f64,
) -> LcvarStatus {
    guard(|| {
        let a = read_matrix(a, p, p, "a")?;
        let ts = TimeSeriesData::new(read_matrix(states, p, m, "states")?).map_err(lib_err)?;
        let r = lcvar::evaluate(&a, &ts).map_err(lib_err)?;
        *normalized_error.as_mut().ok_or_else(|| null_err("normalized_error"))? = r.normalized_error;
        *cosine_score.as_mut().ok_or_else(|| null_err("cosine_score"))? = r.cosine_score;
        Ok(())
    })
}

use std::ffi::CStr;
use std::ptr;

use lcvar_ffi::*;

fn tiny_problem(rho1: f64) -> *mut LcvarProblem {
    // p = 2, three transitions, row-major
    let c = [1.0, 0.5, -0.2, 0.3, -1.0, 0.8];
    let d = [0.4, 0.1, 0.2, -0.3, 0.6, -0.1];
    let s = [1.2, 0.1, 0.1, 0.9];
    let q = [0.5, 0.0, 0.0, 0.5];
    let mut out = ptr::null_mut();
    let st = unsafe { lcvar_problem_new(2, 3, c.as_ptr(), d.as_ptr(), s.as_ptr(), q.as_ptr(), rho1, 1.0, 0.0, &mut out) };
    assert_eq!(st, LcvarStatus::Ok);
    assert!(!out.is_null());
    out
}

fn last_error() -> String {
    let p = lcvar_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn palm_solve_round_trip() {
    let problem = tiny_problem(0.3);
    let mut report = ptr::null_mut();
    let st = unsafe {
        lcvar_palm_solve(problem, LcvarConstraintKind::Cardinality, 2.0, ptr::null(), &mut report)
    };
    assert_eq!(st, LcvarStatus::Ok);
    assert_eq!(unsafe { lcvar_report_dim(report) }, 2);

    let mut est = [f64::NAN; 4];
    assert_eq!(unsafe { lcvar_report_estimate(report, est.as_mut_ptr(), est.len()) }, LcvarStatus::Ok);
    assert!(est.iter().filter(|v| **v != 0.0).count() <= 2);

    let mut status = LcvarSolveStatus::MaxIters;
    assert_eq!(unsafe { lcvar_report_status(report, &mut status) }, LcvarStatus::Ok);
    assert_eq!(status, LcvarSolveStatus::Converged);

    let mut iters = 0usize;
    let mut projections = 0usize;
    let mut phi = f64::NAN;
    let st = unsafe {
        lcvar_report_summary(report, &mut iters, &mut phi, &mut projections, ptr::null_mut(), ptr::null_mut(), ptr::null_mut())
    };
    assert_eq!(st, LcvarStatus::Ok);
    assert!(iters >= 1 && projections >= iters && phi.is_finite());

    let mut small = [0.0; 3];
    assert_eq!(unsafe { lcvar_report_estimate(report, small.as_mut_ptr(), small.len()) }, LcvarStatus::BufferTooSmall);

    unsafe {
        lcvar_report_free(report);
        lcvar_problem_free(problem);
    }
}

#[test]
fn gp_rejects_nonconvex_constraint() {
    let problem = tiny_problem(0.3);
    let mut report = ptr::null_mut();
    let opts = lcvar_gp_options_default();
    let st = unsafe { lcvar_gp_solve(problem, LcvarConstraintKind::Rank, 1.0, &opts, &mut report) };
    assert_eq!(st, LcvarStatus::InvalidArgument);
    assert!(report.is_null());
    assert!(last_error().contains("convex"));

    let st = unsafe { lcvar_gp_solve(problem, LcvarConstraintKind::L1Ball, 0.5, &opts, &mut report) };
    assert_eq!(st, LcvarStatus::Ok);
    let mut est = [0.0; 4];
    unsafe { lcvar_report_estimate(report, est.as_mut_ptr(), 4) };
    assert!(est.iter().map(|v| v.abs()).sum::<f64>() <= 0.5 + 1e-12);
    unsafe {
        lcvar_report_free(report);
        lcvar_problem_free(problem);
    }
}

#[test]
fn invalid_inputs_report_errors() {
    let s = [1.0, 0.0, 0.0, 1.0];
    let mut out = ptr::null_mut();
    let st = unsafe { lcvar_problem_new(2, 2, ptr::null(), s.as_ptr(), s.as_ptr(), s.as_ptr(), 1.0, 1.0, 0.0, &mut out) };
    assert_eq!(st, LcvarStatus::NullPointer);
    assert!(out.is_null());

    let asym = [1.0, 0.5, 0.0, 1.0];
    let st = unsafe { lcvar_problem_new(2, 2, s.as_ptr(), s.as_ptr(), asym.as_ptr(), s.as_ptr(), 1.0, 1.0, 0.0, &mut out) };
    assert_eq!(st, LcvarStatus::InvalidArgument);

    let st = unsafe { lcvar_problem_new(2, 2, s.as_ptr(), s.as_ptr(), s.as_ptr(), s.as_ptr(), -1.0, 1.0, 0.0, &mut out) };
    assert_eq!(st, LcvarStatus::InvalidArgument);

    let mut v = [3.0, -1.0, 2.0, 0.5];
    let st = unsafe { lcvar_project(LcvarConstraintKind::Cardinality, 1.5, 2, v.as_ptr(), v.as_mut_ptr()) };
    assert_eq!(st, LcvarStatus::InvalidArgument);

    unsafe { lcvar_problem_free(ptr::null_mut()) };
    unsafe { lcvar_report_free(ptr::null_mut()) };
    assert_eq!(unsafe { lcvar_report_dim(ptr::null()) }, 0);
}

#[test]
fn projection_in_place() {
    let mut v = [3.0, -1.0, 2.0, 0.5];
    let st = unsafe { lcvar_project(LcvarConstraintKind::Cardinality, 2.0, 2, v.as_ptr(), v.as_mut_ptr()) };
    assert_eq!(st, LcvarStatus::Ok);
    assert_eq!(v, [3.0, 0.0, 2.0, 0.0]);

    let mut w = [0.0; 4];
    let st = unsafe { lcvar_project(LcvarConstraintKind::L1Ball, 1.0, 2, [2.0, 0.0, 0.0, 0.0].as_ptr(), w.as_mut_ptr()) };
    assert_eq!(st, LcvarStatus::Ok);
    assert_eq!(w, [1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn evaluate_identity_is_one() {
    // p = 2, m = 3 states, row-major
    let states = [1.0, 0.5, 3.0, 2.0, -1.0, 0.2];
    let id = [1.0, 0.0, 0.0, 1.0];
    let (mut ne, mut cs) = (f64::NAN, f64::NAN);
    let st = unsafe { lcvar_evaluate(2, id.as_ptr(), 3, states.as_ptr(), &mut ne, &mut cs) };
    // the identity leaves no residual, so the cosine score is undefined
    assert_eq!(st, LcvarStatus::InvalidArgument);
    let zero = [0.0; 4];
    let st = unsafe { lcvar_evaluate(2, zero.as_ptr(), 3, states.as_ptr(), &mut ne, &mut cs) };
    assert_eq!(st, LcvarStatus::Ok);
    assert!(ne > 0.0 && (0.0..=1.0).contains(&cs));
}

#[test]
fn header_declares_the_api() {
    let header = include_str!("../include/lcvar.h");
    for name in [
        "lcvar_problem_new",
        "lcvar_problem_free",
        "lcvar_palm_solve",
        "lcvar_gp_solve",
        "lcvar_report_estimate",
        "lcvar_report_summary",
        "lcvar_project",
        "lcvar_evaluate",
        "lcvar_last_error_message",
        "LCVAR_STATUS_OK",
        "typedef struct LcvarProblem LcvarProblem",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

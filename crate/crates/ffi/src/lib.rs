//! C ABI over the stairclimb harness and a few stateless kernels.
//!
//! Every function returns an [`ScStatus`]; on failure the message is kept per
//! thread and read with [`sc_last_error`]. Handles are opaque and owned by
//! the caller once returned; free them with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use stairclimb::harness::{self, output, CaseConfig, CaseOutcome, Goal};
use stairclimb::model::{two_link_ik, LinkComState, Point, N_JOINTS};
use stairclimb::stability::zmp_actual;
use stairclimb::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Config = 4,
    Io = 5,
    Planning = 6,
    InverseKinematics = 7,
    Dynamics = 8,
    Stability = 9,
    Infeasible = 10,
    OutOfRange = 11,
    Panic = 12,
}

/// Values accepted by [`sc_run`] as `goal`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScGoal {
    Plan = 0,
    Ik = 1,
    Simulate = 2,
    Tune = 3,
    RunCase = 4,
}

/// A validated case configuration.
pub struct ScCase {
    config: CaseConfig,
}

/// Report and traces of one run.
pub struct ScOutcome {
    outcome: CaseOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(error: &Error) -> ScStatus {
    match error {
        Error::Stage { source, .. } => status_of(source),
        Error::InvalidParameter(_) => ScStatus::InvalidArgument,
        Error::Config(_) | Error::Parse { .. } => ScStatus::Config,
        Error::Io { .. } => ScStatus::Io,
        Error::Workspace { .. }
        | Error::GroundPenetration { .. }
        | Error::NonMonotoneCycloid(_)
        | Error::DegenerateBlend(_)
        | Error::NoConvergence { .. } => ScStatus::Planning,
        Error::IkNotConverged { .. } | Error::IkSample { .. } => ScStatus::InverseKinematics,
        Error::Singular(_) | Error::SingularMassMatrix(_) | Error::BlowUp { .. } => ScStatus::Dynamics,
        Error::FreeFall(_) | Error::Airborne => ScStatus::Stability,
        Error::Infeasible(_) => ScStatus::Infeasible,
    }
}

struct Failure(ScStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> ScStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            ScStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ScStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(ScStatus::NullPointer, format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(ScStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

fn goal_of(code: u32) -> Result<Goal, Failure> {
    Ok(match code {
        0 => Goal::Plan,
        1 => Goal::Ik,
        2 => Goal::Simulate,
        3 => Goal::Tune,
        4 => Goal::RunCase,
        other => return Err(Failure(ScStatus::InvalidArgument, format!("unknown goal {other}"))),
    })
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and validates a TOML case configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_case_from_toml(toml: *const c_char, out: *mut *mut ScCase) -> ScStatus {
    guard(|| {
        non_null(out, "out")?;
        let config = CaseConfig::from_toml_str(text(toml, "toml")?)?;
        *out = Box::into_raw(Box::new(ScCase { config }));
        Ok(())
    })
}

/// Loads and validates a TOML case configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_case_load(path: *const c_char, out: *mut *mut ScCase) -> ScStatus {
    guard(|| {
        non_null(out, "out")?;
        let config = CaseConfig::load(Path::new(text(path, "path")?))?;
        *out = Box::into_raw(Box::new(ScCase { config }));
        Ok(())
    })
}

/// One of the shipped cases, `index` 0 to 2.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_case_shipped(index: usize, out: *mut *mut ScCase) -> ScStatus {
    guard(|| {
        non_null(out, "out")?;
        let mut cases = harness::shipped_cases();
        if index >= cases.len() {
            return Err(Failure(ScStatus::OutOfRange, format!("no shipped case {index}")));
        }
        *out = Box::into_raw(Box::new(ScCase {
            config: cases.swap_remove(index),
        }));
        Ok(())
    })
}

/// # Safety
/// `case` must come from an `sc_case_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn sc_case_set_seed(case: *mut ScCase, seed: u64) -> ScStatus {
    guard(|| {
        non_null(case, "case")?;
        (*case).config.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `case` must come from an `sc_case_*` constructor, or be null.
#[no_mangle]
pub unsafe extern "C" fn sc_case_free(case: *mut ScCase) {
    if !case.is_null() {
        drop(Box::from_raw(case));
    }
}

/// Runs `case` up to `goal` (an [`ScGoal`] value). With a non-null
/// `out_dir` the harness files are written there as well.
///
/// # Safety
/// `case` must be valid, `out_dir` null or NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sc_run(
    case: *const ScCase,
    goal: u32,
    out_dir: *const c_char,
    out: *mut *mut ScOutcome,
) -> ScStatus {
    guard(|| {
        non_null(case, "case")?;
        non_null(out, "out")?;
        let goal = goal_of(goal)?;
        let dir = if out_dir.is_null() {
            None
        } else {
            Some(Path::new(text(out_dir, "out_dir")?))
        };
        let outcome = harness::run(&(*case).config, goal, dir)?;
        *out = Box::into_raw(Box::new(ScOutcome { outcome }));
        Ok(())
    })
}

/// # Safety
/// `outcome` must come from [`sc_run`], or be null.
#[no_mangle]
pub unsafe extern "C" fn sc_outcome_free(outcome: *mut ScOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// The report as JSON with 17-digit floats. Free with [`sc_string_free`].
///
/// # Safety
/// `outcome` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sc_outcome_report_json(outcome: *const ScOutcome, out: *mut *mut c_char) -> ScStatus {
    guard(|| {
        non_null(outcome, "outcome")?;
        non_null(out, "out")?;
        let json = output::to_json(&(*outcome).outcome.report)?;
        *out = CString::new(json)
            .map_err(|_| Failure(ScStatus::InvalidArgument, "report contains NUL".into()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn sc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Peak planned joint jerk, rad/s³.
///
/// # Safety
/// `outcome` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sc_outcome_planned_max_jerk(outcome: *const ScOutcome, out: *mut f64) -> ScStatus {
    guard(|| {
        non_null(outcome, "outcome")?;
        non_null(out, "out")?;
        let plan = (*outcome).outcome.report.plan.as_ref();
        *out = plan
            .ok_or_else(|| Failure(ScStatus::OutOfRange, "no plan in this outcome".into()))?
            .planned_max_jerk;
        Ok(())
    })
}

/// Number of rollout samples; 0 when the run had no rollout.
///
/// # Safety
/// `outcome` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sc_outcome_rollout_len(outcome: *const ScOutcome, out: *mut usize) -> ScStatus {
    guard(|| {
        non_null(outcome, "outcome")?;
        non_null(out, "out")?;
        *out = (*outcome).outcome.traces.rollout.as_ref().map_or(0, |r| r.samples.len());
        Ok(())
    })
}

/// Rollout sample `k`: time, the nine joint angles and the nine torques.
/// A missing ZMP is reported as NaN in `zmp_margin`.
///
/// # Safety
/// `outcome` must be valid; `t` and `zmp_margin` writable; `q` and `tau`
/// writable arrays of 9 doubles.
#[no_mangle]
pub unsafe extern "C" fn sc_outcome_rollout_sample(
    outcome: *const ScOutcome,
    k: usize,
    t: *mut f64,
    q: *mut f64,
    tau: *mut f64,
    zmp_margin: *mut f64,
) -> ScStatus {
    guard(|| {
        non_null(outcome, "outcome")?;
        for (p, name) in [(t, "t"), (q, "q"), (tau, "tau"), (zmp_margin, "zmp_margin")] {
            non_null(p, name)?;
        }
        let samples = (*outcome).outcome.traces.rollout.as_ref().map_or(&[][..], |r| &r.samples[..]);
        let s = samples
            .get(k)
            .ok_or_else(|| Failure(ScStatus::OutOfRange, format!("sample {k} of {}", samples.len())))?;
        *t = s.t;
        ptr::copy_nonoverlapping(s.q.as_ptr(), q, N_JOINTS);
        ptr::copy_nonoverlapping(s.tau.as_ptr(), tau, N_JOINTS);
        *zmp_margin = s.zmp.map_or(f64::NAN, |z| z.margin);
        Ok(())
    })
}

/// Multi-mass ZMP of `n` point masses. `position` and `acceleration` hold
/// `2n` doubles as (x, z) pairs, heights above the supporting plane.
///
/// # Safety
/// The arrays must hold the stated number of doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sc_zmp(
    position: *const f64,
    acceleration: *const f64,
    masses: *const f64,
    n: usize,
    gravity: f64,
    k_slope: f64,
    out: *mut f64,
) -> ScStatus {
    guard(|| {
        for (p, name) in [(position, "position"), (acceleration, "acceleration"), (masses, "masses")] {
            non_null(p, name)?;
        }
        non_null(out, "out")?;
        let pos = std::slice::from_raw_parts(position, 2 * n);
        let acc = std::slice::from_raw_parts(acceleration, 2 * n);
        let links: Vec<LinkComState> = (0..n)
            .map(|i| LinkComState {
                position: Point::new(pos[2 * i], pos[2 * i + 1]),
                velocity: Point::zeros(),
                acceleration: Point::new(acc[2 * i], acc[2 * i + 1]),
            })
            .collect();
        *out = zmp_actual(&links, std::slice::from_raw_parts(masses, n), gravity, k_slope)?;
        Ok(())
    })
}

/// Closed-form two-link leg angles with the knee forward.
///
/// # Safety
/// `theta1` and `theta2` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_two_link_ik(
    hip_x: f64,
    hip_z: f64,
    ankle_x: f64,
    ankle_z: f64,
    l1: f64,
    l2: f64,
    theta1: *mut f64,
    theta2: *mut f64,
) -> ScStatus {
    guard(|| {
        non_null(theta1, "theta1")?;
        non_null(theta2, "theta2")?;
        let (a, b) = two_link_ik(Point::new(hip_x, hip_z), Point::new(ankle_x, ankle_z), l1, l2)
            .ok_or_else(|| Failure(ScStatus::OutOfRange, "ankle outside the two-link workspace".into()))?;
        *theta1 = a;
        *theta2 = b;
        Ok(())
    })
}

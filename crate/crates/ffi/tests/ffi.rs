use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use stairclimb_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sc_last_error()) }.to_string_lossy().into_owned()
}

fn shipped(index: usize) -> *mut ScCase {
    let mut case = ptr::null_mut();
    assert_eq!(unsafe { sc_case_shipped(index, &mut case) }, ScStatus::Ok);
    assert!(!case.is_null());
    case
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(sc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_pointers_are_reported() {
    unsafe {
        assert_eq!(sc_case_from_toml(ptr::null(), &mut ptr::null_mut()), ScStatus::NullPointer);
        assert!(last_error().contains("toml"));
        assert_eq!(sc_case_shipped(0, ptr::null_mut()), ScStatus::NullPointer);
        assert_eq!(sc_run(ptr::null(), 0, ptr::null(), &mut ptr::null_mut()), ScStatus::NullPointer);
        sc_case_free(ptr::null_mut());
        sc_outcome_free(ptr::null_mut());
        sc_string_free(ptr::null_mut());
    }
}

#[test]
fn bad_config_sets_the_config_code() {
    let text = CString::new("schema_version = 9\ncase_id = \"x\"\n[stairs]\nlength = 0.5\nratio = 0.6\n").unwrap();
    let mut case = ptr::null_mut();
    assert_eq!(unsafe { sc_case_from_toml(text.as_ptr(), &mut case) }, ScStatus::Config);
    assert!(case.is_null());
    assert!(last_error().contains("schema_version"));

    let bytes = [0xffu8, 0xfe, 0];
    let status = unsafe { sc_case_from_toml(bytes.as_ptr().cast(), &mut case) };
    assert_eq!(status, ScStatus::InvalidUtf8);

    let missing = CString::new("/nonexistent/case.toml").unwrap();
    assert_eq!(unsafe { sc_case_load(missing.as_ptr(), &mut case) }, ScStatus::Io);
    assert_eq!(unsafe { sc_case_shipped(3, &mut case) }, ScStatus::OutOfRange);
}

#[test]
fn plan_run_reports_the_jerk() {
    let case = shipped(0);
    unsafe {
        assert_eq!(sc_case_set_seed(case, 1), ScStatus::Ok);
        let mut outcome = ptr::null_mut();
        assert_eq!(sc_run(case, 7, ptr::null(), &mut outcome), ScStatus::InvalidArgument);
        assert_eq!(sc_run(case, ScGoal::Plan as u32, ptr::null(), &mut outcome), ScStatus::Ok);
        assert_eq!(last_error(), "");

        let mut jerk = 0.0;
        assert_eq!(sc_outcome_planned_max_jerk(outcome, &mut jerk), ScStatus::Ok);
        assert!(jerk.is_finite() && jerk > 0.0);

        let mut json = ptr::null_mut();
        assert_eq!(sc_outcome_report_json(outcome, &mut json), ScStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(report["plan"]["planned_max_jerk"].as_f64().unwrap(), jerk);
        assert_eq!(report["goal"], "plan");
        sc_string_free(json);

        let mut n = 99;
        assert_eq!(sc_outcome_rollout_len(outcome, &mut n), ScStatus::Ok);
        assert_eq!(n, 0);
        let (mut t, mut m) = (0.0, 0.0);
        let (mut q, mut tau) = ([0.0; 9], [0.0; 9]);
        let status = sc_outcome_rollout_sample(outcome, 0, &mut t, q.as_mut_ptr(), tau.as_mut_ptr(), &mut m);
        assert_eq!(status, ScStatus::OutOfRange);
        sc_outcome_free(outcome);
        sc_case_free(case);
    }
}

#[test]
fn simulate_run_exposes_samples_and_files() {
    let case = shipped(0);
    let dir = tempfile::tempdir().unwrap();
    let out_dir = CString::new(dir.path().to_str().unwrap()).unwrap();
    unsafe {
        let mut outcome = ptr::null_mut();
        assert_eq!(sc_run(case, ScGoal::Simulate as u32, out_dir.as_ptr(), &mut outcome), ScStatus::Ok);
        let mut n = 0;
        sc_outcome_rollout_len(outcome, &mut n);
        assert!(n > 100);
        let (mut t, mut m) = (0.0, 0.0);
        let (mut q, mut tau) = ([0.0; 9], [0.0; 9]);
        let status = sc_outcome_rollout_sample(outcome, n - 1, &mut t, q.as_mut_ptr(), tau.as_mut_ptr(), &mut m);
        assert_eq!(status, ScStatus::Ok);
        assert!(t > 3.0 && q.iter().all(|v| v.is_finite()));
        sc_outcome_free(outcome);
        sc_case_free(case);
    }
    assert!(dir.path().join("rollout.csv").exists());
}

#[test]
fn stage_failure_maps_to_planning() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/configs/case1.toml")).unwrap();
    let text = text.replace("knot_shift = true", "knot_shift = false");
    let toml = CString::new(text).unwrap();
    let mut case = ptr::null_mut();
    unsafe {
        assert_eq!(sc_case_from_toml(toml.as_ptr(), &mut case), ScStatus::Ok);
        let mut outcome = ptr::null_mut();
        // the default timing does not give a monotone track on this staircase
        assert_eq!(sc_run(case, ScGoal::Plan as u32, ptr::null(), &mut outcome), ScStatus::Planning);
        assert!(outcome.is_null());
        assert!(last_error().contains("plan"));
        sc_case_free(case);
    }
}

#[test]
fn kernels_match_closed_forms() {
    unsafe {
        let (mut a, mut b) = (0.0, 0.0);
        assert_eq!(sc_two_link_ik(0.0, 0.8, 0.0, 0.0, 0.4, 0.4, &mut a, &mut b), ScStatus::Ok);
        assert!((a - std::f64::consts::FRAC_PI_2).abs() <= 1e-7 && b.abs() <= 1e-3);
        assert_eq!(sc_two_link_ik(0.0, 0.8, 0.0, -1.0, 0.4, 0.4, &mut a, &mut b), ScStatus::OutOfRange);

        let pos = [0.3, 0.8];
        let acc = [1.0, 0.0];
        let mut x = 0.0;
        assert_eq!(sc_zmp(pos.as_ptr(), acc.as_ptr(), [1.0].as_ptr(), 1, 9.81, 0.0, &mut x), ScStatus::Ok);
        assert!((x - (0.3 - 0.8 / 9.81)).abs() <= 1e-15);
        let falling = [0.0, -9.81];
        let status = sc_zmp(pos.as_ptr(), falling.as_ptr(), [1.0].as_ptr(), 1, 9.81, 0.0, &mut x);
        assert_eq!(status, ScStatus::Stability);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/stairclimb.h");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{header}\"\nint main(void) {{\n  ScCase *c = 0;\n  ScStatus s = sc_case_shipped(0, &c);\n  sc_case_free(c);\n  return s == ScStatus_Ok && ScGoal_RunCase == 4 ? 0 : 1;\n}}\n"
        ),
    )
    .unwrap();
    let out = Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&src).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

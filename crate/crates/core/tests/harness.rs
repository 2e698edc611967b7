use std::fs;
use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use stairclimb::control::summarize;
use stairclimb::harness::output::{self, fmt_f64, load_rollout, Table};
use stairclimb::harness::{
    emit_outputs, plot_manifest, run, shipped_cases, CaseConfig, CaseOutcome, Goal, ZmpStats, NONDETERMINISTIC_FILES,
};
use stairclimb::Error;

fn case1() -> CaseConfig {
    shipped_cases().remove(0)
}

fn files(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        if path.is_dir() {
            out.extend(files(&path).into_iter().map(|f| format!("{name}/{f}")));
        } else {
            out.push(name);
        }
    }
    out.sort();
    out
}

#[test]
fn floats_use_seventeen_significant_digits() {
    assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
    assert_eq!(fmt_f64(-2.5), "-2.5000000000000000e0");
    assert_eq!(fmt_f64(f64::NAN), "NaN");
    assert_eq!(fmt_f64(f64::INFINITY), "inf");
    assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
    for text in ["NaN", "inf", "-inf"] {
        assert_eq!(fmt_f64(text.parse().unwrap()), text);
    }
}

#[test]
fn json_floats_reload_exactly() {
    let values = vec![0.1, 1.0 / 3.0, -7.25e-300, 6.02214076e23, f64::MIN_POSITIVE, 5e-324];
    let text = output::to_json(&values).unwrap();
    assert!(text.contains("3.3333333333333331e-1"));
    let back: Vec<f64> = serde_json::from_str(&text).unwrap();
    for (a, b) in values.iter().zip(&back) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert_eq!(output::to_json(&f64::INFINITY).unwrap().trim(), "null");
}

#[test]
fn table_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let mut t = Table::new(["a", "b"]);
    t.push(vec![fmt_f64(0.1), "x".into()]);
    t.push(vec![fmt_f64(-3.0), "y".into()]);
    t.write(&path).unwrap();
    let back = Table::read(&path).unwrap();
    assert_eq!(back, t);
    assert_eq!(back.column_f64("a").unwrap(), vec![0.1, -3.0]);
    assert!(back.column("c").is_none());
    assert!(back.column_f64("b").is_none());

    fs::write(&path, "a,b\n1,2,3\n").unwrap();
    assert!(matches!(Table::read(&path), Err(Error::Parse { .. })));
}

#[test]
fn manifest_lists_every_series_once() {
    let m = plot_manifest();
    assert_eq!(m.len(), 4 + 3 + 1 + 3 * 9 + 4);
    let mut names: Vec<&str> = m.iter().map(|s| s.file.as_str()).collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), m.len());
    let nondet: Vec<String> = m
        .iter()
        .map(|s| format!("{}/{}", output::PLOT_DIR, s.file))
        .filter(|f| NONDETERMINISTIC_FILES.contains(&f.as_str()))
        .collect();
    assert_eq!(nondet, vec!["plot/ik_time.dat".to_string()]);
}

#[test]
fn shipped_cases_keep_their_geometry() {
    let cases = shipped_cases();
    let table = [("case1", 0.5588, 0.64), ("case2", 0.5080, 0.70), ("case3", 0.5588, 0.72)];
    assert_eq!(cases.len(), 3);
    for (cfg, (id, length, ratio)) in cases.iter().zip(table) {
        assert_eq!(cfg.case_id, id);
        assert_eq!(cfg.stairs.length, length);
        assert_eq!(cfg.stairs.ratio, ratio);
        let spec = cfg.stairs.spec();
        assert_eq!(spec.run, length / 2.0);
        assert_eq!(spec.rise, ratio * spec.run);
        assert_eq!((cfg.aco.n_ants, cfg.aco.n_iterations, cfg.aco.evaporation), (30, 100, 0.7));
    }
}

#[test]
fn config_rejects_bad_input() {
    let text = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/case1.toml")).unwrap();
    let bumped = text.replace("schema_version = 1", "schema_version = 2");
    assert!(matches!(CaseConfig::from_toml_str(&bumped), Err(Error::Config(m)) if m.contains("schema_version")));
    let unknown = format!("surprise = 1\n{text}");
    assert!(CaseConfig::from_toml_str(&unknown).is_err());
    let typo = format!("{text}\nn_ant = 5\n");
    assert!(CaseConfig::from_toml_str(&typo).is_err());
    let bad_id = text.replace("case_id = \"case1\"", "case_id = \"../x\"");
    assert!(CaseConfig::from_toml_str(&bad_id).is_err());
    let flat = text.replace("ratio = 0.64", "ratio = 0.0");
    assert!(CaseConfig::from_toml_str(&flat).is_err());
}

#[test]
fn config_echo_reloads_equal() {
    let mut cfg = case1();
    cfg.seed = 987_654_321;
    cfg.aco.locality = 0.1 + 0.2;
    let dir = tempfile::tempdir().unwrap();
    run(&cfg, Goal::Plan, Some(dir.path())).unwrap();
    let back = CaseConfig::load(&dir.path().join(output::CONFIG_FILE)).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn plan_goal_writes_plan_files_only() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run(&case1(), Goal::Plan, Some(dir.path())).unwrap();
    assert!(outcome.report.ik.is_none() && outcome.report.rollout.is_none());
    let expected = [
        "config.toml",
        "gait.csv",
        "manifest.json",
        "plan.json",
        "plot/hip.dat",
        "plot/swing_ankle.dat",
        "plot/swing_sole.dat",
        "plot/swing_toe.dat",
        "report.json",
        "timing.json",
    ];
    assert_eq!(files(dir.path()), expected);
    let gait = Table::read(&dir.path().join(output::GAIT_FILE)).unwrap();
    let plan = outcome.traces.gait.unwrap();
    assert_eq!(gait.rows.len(), plan.len());
    assert_eq!(gait.column_f64("hip_x").unwrap(), plan.hip.iter().map(|p| p.x).collect::<Vec<_>>());
}

#[test]
fn failing_stage_leaves_only_the_echo() {
    let mut cfg = case1();
    cfg.gait.knot_shift = false;
    cfg.gait.params.t1 = cfg.gait.params.t2;
    let dir = tempfile::tempdir().unwrap();
    let err = run(&cfg, Goal::RunCase, Some(dir.path())).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "plan", .. }), "{err}");
    assert_eq!(files(dir.path()), ["config.toml", "failure.json"]);
    let failure: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join(output::FAILURE_FILE)).unwrap()).unwrap();
    assert!(failure["error"].as_str().unwrap().contains("plan"));
}

#[test]
fn rerun_replaces_stale_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = case1();
    run(&cfg, Goal::Simulate, Some(dir.path())).unwrap();
    run(&cfg, Goal::Plan, Some(dir.path())).unwrap();
    assert!(!dir.path().join(output::ROLLOUT_FILE).exists());
    assert!(!dir.path().join("plot/zmp.dat").exists());
}

#[test]
fn empty_outcome_writes_report_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = case1();
    let mut outcome = run(&cfg, Goal::Plan, None).unwrap();
    outcome.traces = Default::default();
    outcome.report.plan = None;
    emit_outputs(&outcome, dir.path()).unwrap();
    assert_eq!(files(dir.path()), ["manifest.json", "report.json", "timing.json"]);
    assert_eq!(fs::read_to_string(dir.path().join(output::MANIFEST_FILE)).unwrap().trim(), "[]");
}

fn simulate_into(dir: &Path) -> CaseOutcome {
    run(&case1(), Goal::Simulate, Some(dir)).unwrap()
}

#[test]
fn report_is_recomputable_from_the_rollout_trace() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = simulate_into(dir.path());
    let cfg = case1();
    let samples = load_rollout(&dir.path().join(output::ROLLOUT_FILE)).unwrap();
    assert_eq!(samples, outcome.traces.rollout.as_ref().unwrap().samples);

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join(output::REPORT_FILE)).unwrap()).unwrap();
    let dt = report["plan"]["params"]["dt"].as_f64().unwrap();
    let failure = report["rollout"]["failure"].as_str().map(String::from);
    let summary = summarize(&samples, dt, cfg.aco.zmp_penalty, failure);
    let recomputed: serde_json::Value = serde_json::from_str(&output::to_json(&summary).unwrap()).unwrap();
    assert_eq!(recomputed, report["rollout"]);
    let zmp: serde_json::Value =
        serde_json::from_str(&output::to_json(&ZmpStats::from_samples(&samples)).unwrap()).unwrap();
    assert_eq!(zmp, report["zmp"]);

    let manifest: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(dir.path().join(output::MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest.len(), plot_manifest().len() - 1);
    for s in &manifest {
        let path = dir.path().join(output::PLOT_DIR).join(s["file"].as_str().unwrap());
        let text = fs::read_to_string(path).unwrap();
        assert!(text.starts_with('#'));
        for line in text.lines().skip(1) {
            let cols: Vec<f64> = line.split(' ').map(|v| v.parse().unwrap()).collect();
            assert_eq!(cols.len(), 2);
        }
    }
    let q1: Vec<f64> = fs::read_to_string(dir.path().join("plot/q_1.dat"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(' ').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(q1, samples.iter().map(|s| s.q[0]).collect::<Vec<_>>());
}

#[test]
fn identical_runs_write_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate_into(a.path());
    simulate_into(b.path());
    let names = files(a.path());
    assert_eq!(names, files(b.path()));
    for name in names.iter().filter(|n| !NONDETERMINISTIC_FILES.contains(&n.as_str())) {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn cli_plans_a_case() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c1");
    let status = Command::new(env!("CARGO_BIN_EXE_stairclimb"))
        .args(["plan", "--config", concat!(env!("CARGO_MANIFEST_DIR"), "/configs/case1.toml"), "--seed", "5"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let echo = CaseConfig::load(&out.join(output::CONFIG_FILE)).unwrap();
    assert_eq!(echo.seed, 5);
    assert!(out.join(output::GAIT_FILE).exists());

    let missing = Command::new(env!("CARGO_BIN_EXE_stairclimb"))
        .args(["plan", "--config", "/nonexistent.toml"])
        .output()
        .unwrap();
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nonexistent"));
}

proptest! {
    #[test]
    fn any_float_survives_formatting(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        let back: f64 = fmt_f64(x).parse().unwrap();
        if x.is_nan() {
            prop_assert!(back.is_nan());
        } else {
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}

//! Case runner: config in, plan, joint trajectory, tuning and rollout out.

pub mod config;
pub mod output;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::control::{
    aco_tune, rollout, ControllerGains, Plant, Reference, RolloutResult, RolloutSample, RolloutSummary, TuneResult,
};
use crate::error::{Error, Result};
use crate::gait_planner::{
    assemble_gait, fd_max_accel, fd_max_jerk, knot_shift_optimize, planned_joint_trajectory, CartesianGait, GaitParams,
    KnotShiftResult, StairSpec, StepKind,
};
use crate::ik_network::{solve_gait, JointTrajectory};

pub use config::{shipped_cases, CaseConfig, SCHEMA_VERSION};
pub use output::{plot_manifest, SeriesInfo, NONDETERMINISTIC_FILES};

/// How far a run goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Goal {
    /// Gait plan only.
    Plan,
    /// Plan and joint trajectory.
    Ik,
    /// Fixed-gain rollout of the joint trajectory.
    Simulate,
    /// Gain tuning without the final rollout.
    Tune,
    /// Tuning followed by a rollout with the tuned gains.
    RunCase,
}

impl Goal {
    fn solves_ik(self) -> bool {
        self != Goal::Plan
    }

    fn tunes(self) -> bool {
        matches!(self, Goal::Tune | Goal::RunCase)
    }

    fn rolls_out(self) -> bool {
        matches!(self, Goal::Simulate | Goal::RunCase)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub params: GaitParams,
    pub knot_shift: Option<KnotShiftResult>,
    pub samples: usize,
    pub duration: f64,
    /// Peak joint acceleration of the plan, rad/s², by finite differences.
    pub planned_max_accel: f64,
    /// Peak joint jerk of the plan, rad/s³, by finite differences.
    pub planned_max_jerk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkSummary {
    pub poses: usize,
    pub total_epochs: usize,
    pub max_epochs: usize,
    pub max_error: f64,
    pub total_halvings: usize,
}

impl IkSummary {
    pub fn from_trajectory(traj: &JointTrajectory) -> Self {
        Self {
            poses: traj.len(),
            total_epochs: traj.epochs.iter().flatten().sum(),
            max_epochs: traj.epochs.iter().flatten().copied().max().unwrap_or(0),
            max_error: traj.error.iter().flatten().copied().fold(0.0, f64::max),
            total_halvings: traj.halvings.iter().flatten().sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningSummary {
    pub gains: ControllerGains,
    pub best_cost: f64,
    pub evaluations: usize,
    pub iterations: usize,
}

impl TuningSummary {
    pub fn from_result(tune: &TuneResult) -> Self {
        Self {
            gains: tune.gains,
            best_cost: tune.best_cost,
            evaluations: tune.evaluations,
            iterations: tune.curve.len(),
        }
    }
}

/// Margin statistics over single-support samples with a defined ZMP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZmpStats {
    pub supported_ssp: usize,
    pub stable_ssp: usize,
    pub stable_fraction: f64,
    pub min_margin: f64,
    pub mean_margin: f64,
}

impl ZmpStats {
    pub fn from_samples(samples: &[RolloutSample]) -> Self {
        let margins: Vec<f64> = samples
            .iter()
            .filter(|s| s.ssp)
            .filter_map(|s| s.zmp.map(|z| z.margin))
            .collect();
        let n = margins.len();
        let stable = margins.iter().filter(|m| **m >= 0.0).count();
        Self {
            supported_ssp: n,
            stable_ssp: stable,
            stable_fraction: if n == 0 { 0.0 } else { stable as f64 / n as f64 },
            min_margin: margins.iter().copied().fold(f64::INFINITY, f64::min),
            mean_margin: if n == 0 { f64::NAN } else { margins.iter().sum::<f64>() / n as f64 },
        }
    }
}

/// Everything a run reports. Sections of stages that did not run are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub schema_version: u32,
    pub case_id: String,
    pub seed: u64,
    pub goal: Goal,
    pub stairs: StairSpec,
    pub step_kind: StepKind,
    pub plan: Option<PlanSummary>,
    pub ik: Option<IkSummary>,
    pub tuning: Option<TuningSummary>,
    /// Gains of the final rollout.
    pub gains: Option<ControllerGains>,
    pub rollout: Option<RolloutSummary>,
    pub zmp: Option<ZmpStats>,
}

impl CaseReport {
    fn header(cfg: &CaseConfig, goal: Goal) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            case_id: cfg.case_id.clone(),
            seed: cfg.seed,
            goal,
            stairs: cfg.stairs.spec(),
            step_kind: cfg.stairs.step_kind,
            plan: None,
            ik: None,
            tuning: None,
            gains: None,
            rollout: None,
            zmp: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CaseTraces {
    pub gait: Option<CartesianGait>,
    pub trajectory: Option<JointTrajectory>,
    pub tuning: Option<TuneResult>,
    pub rollout: Option<RolloutResult>,
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stages: BTreeMap<String, f64>,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub report: CaseReport,
    pub traces: CaseTraces,
    pub timing: Timing,
}

#[derive(Serialize)]
struct Failure<'a> {
    case_id: &'a str,
    error: String,
}

/// Plans the gait, searching knot times first when configured.
pub fn plan_stage(cfg: &CaseConfig) -> Result<(CartesianGait, PlanSummary)> {
    let spec = cfg.stairs.spec();
    let model = cfg.model();
    let kind = cfg.stairs.step_kind;
    let knot_shift = if cfg.gait.knot_shift {
        Some(knot_shift_optimize(&spec, &model, kind, &cfg.gait.bounds, &cfg.gait.params, cfg.seed)?)
    } else {
        None
    };
    let params = knot_shift.map_or(cfg.gait.params, |k| k.params);
    let gait = assemble_gait(&spec, &model, &params, kind)?;
    let q = planned_joint_trajectory(&gait, &model, cfg.nominal_torso_pitch())?;
    let summary = PlanSummary {
        params,
        knot_shift,
        samples: gait.len(),
        duration: gait.t.last().copied().unwrap_or(0.0),
        planned_max_accel: fd_max_accel(&q, params.dt),
        planned_max_jerk: fd_max_jerk(&q, params.dt),
    };
    Ok((gait, summary))
}

pub fn ik_stage(cfg: &CaseConfig, gait: &CartesianGait) -> Result<JointTrajectory> {
    solve_gait(gait, &cfg.model(), &cfg.ik, cfg.nominal_torso_pitch(), cfg.seed)
}

fn rollout_with(cfg: &CaseConfig, plant: &Plant, reference: &Reference, gains: &ControllerGains) -> RolloutResult {
    rollout(
        gains,
        reference,
        &reference.initial_state(gains.q5_torso),
        plant,
        &cfg.rollout_settings(),
    )
}

pub fn tune_stage(cfg: &CaseConfig, plant: &Plant, reference: &Reference) -> Result<TuneResult> {
    aco_tune(&cfg.aco_config(), |g| rollout_with(cfg, plant, reference, g))
}

/// A blown-up rollout is not an error; its summary carries the failure.
pub fn simulate_stage(
    cfg: &CaseConfig,
    plant: &Plant,
    reference: &Reference,
    gains: &ControllerGains,
) -> RolloutResult {
    rollout_with(cfg, plant, reference, gains)
}

fn timed<T>(timing: &mut Timing, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    timing.stages.insert(stage.to_string(), start.elapsed().as_secs_f64());
    out
}

fn run_stages(cfg: &CaseConfig, goal: Goal, outcome: &mut CaseOutcome) -> Result<()> {
    let CaseOutcome { report, traces, timing } = outcome;
    let (gait, plan) = timed(timing, "plan", || plan_stage(cfg)).map_err(|e| e.in_stage("plan"))?;
    report.plan = Some(plan);
    traces.gait = Some(gait);
    if !goal.solves_ik() {
        return Ok(());
    }
    let gait = traces.gait.as_ref().expect("plan stage ran");

    let traj = timed(timing, "ik", || ik_stage(cfg, gait)).map_err(|e| e.in_stage("ik"))?;
    report.ik = Some(IkSummary::from_trajectory(&traj));
    let reference = Reference::from_gait(&traj, gait);
    traces.trajectory = Some(traj);
    let plant = Plant::new(&cfg.model(), cfg.contact, gait);

    let mut gains = cfg.simulation_gains();
    if goal.tunes() {
        let tune = timed(timing, "tune", || tune_stage(cfg, &plant, &reference)).map_err(|e| e.in_stage("tune"))?;
        report.tuning = Some(TuningSummary::from_result(&tune));
        gains = tune.gains;
        traces.tuning = Some(tune);
    }
    if goal.rolls_out() {
        let result = timed(timing, "rollout", || Ok(simulate_stage(cfg, &plant, &reference, &gains)))?;
        report.gains = Some(gains);
        report.rollout = Some(result.summary.clone());
        report.zmp = Some(ZmpStats::from_samples(&result.samples));
        traces.rollout = Some(result);
    }
    Ok(())
}

fn emit_traces(traces: &CaseTraces, dir: &Path) -> Result<Vec<SeriesInfo>> {
    let mut series = Vec::new();
    if let Some(gait) = &traces.gait {
        series.extend(output::write_plan_files(dir, gait)?);
    }
    if let Some(traj) = &traces.trajectory {
        series.extend(output::write_ik_files(dir, traj)?);
    }
    if let Some(tune) = &traces.tuning {
        series.extend(output::write_tuning_files(dir, tune)?);
    }
    if let Some(r) = &traces.rollout {
        series.extend(output::write_rollout_files(dir, r)?);
    }
    Ok(series)
}

/// Writes the report, timing, traces and plot manifest of `outcome`.
pub fn emit_outputs(outcome: &CaseOutcome, dir: &Path) -> Result<()> {
    let series = emit_traces(&outcome.traces, dir)?;
    if let Some(plan) = &outcome.report.plan {
        output::write_json(&dir.join(output::PLAN_FILE), plan)?;
    }
    output::write_json(&dir.join(output::MANIFEST_FILE), &series)?;
    output::write_json(&dir.join(output::REPORT_FILE), &outcome.report)?;
    output::write_json(&dir.join(output::TIMING_FILE), &outcome.timing)
}

/// Runs `cfg` up to `goal`. With an output directory the config echo is
/// written first; a failing stage leaves the echo, the traces of the stages
/// before it and `failure.json`.
pub fn run(cfg: &CaseConfig, goal: Goal, out: Option<&Path>) -> Result<CaseOutcome> {
    cfg.validate()?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        output::clear_outputs(dir)?;
        output::write_text(&dir.join(output::CONFIG_FILE), &cfg.to_toml_string()?)?;
    }
    let start = Instant::now();
    let mut outcome = CaseOutcome {
        report: CaseReport::header(cfg, goal),
        traces: CaseTraces::default(),
        timing: Timing::default(),
    };
    let result = run_stages(cfg, goal, &mut outcome);
    outcome.timing.total = start.elapsed().as_secs_f64();
    match (result, out) {
        (Ok(()), Some(dir)) => emit_outputs(&outcome, dir)?,
        (Ok(()), None) => {}
        (Err(e), Some(dir)) => {
            emit_traces(&outcome.traces, dir)?;
            let failure = Failure {
                case_id: &cfg.case_id,
                error: e.to_string(),
            };
            output::write_json(&dir.join(output::FAILURE_FILE), &failure)?;
            return Err(e);
        }
        (Err(e), None) => return Err(e),
    }
    Ok(outcome)
}

pub fn run_case(cfg: &CaseConfig, out: Option<&Path>) -> Result<CaseOutcome> {
    run(cfg, Goal::RunCase, out)
}

/// One row of the cross-case summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub case_id: String,
    pub run: f64,
    pub rise: f64,
    pub planned_max_jerk: f64,
    pub gains: ControllerGains,
    pub cost: f64,
    pub tracking_cost: f64,
    pub energy_joules: f64,
    pub peak_torque: f64,
    pub rollout_max_jerk: f64,
    pub stable_fraction: f64,
    pub min_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceSummary {
    pub seed: Option<u64>,
    pub cases: Vec<CaseRow>,
    /// Case ids sorted by planned peak jerk, lowest first.
    pub jerk_order: Vec<String>,
}

pub const SUMMARY_FILE: &str = "summary.json";

/// Runs every case into `root/<case_id>/` and writes `root/summary.json`.
/// `seed` replaces each case's own seed when given.
pub fn reproduce_cases(configs: &[CaseConfig], root: &Path, seed: Option<u64>) -> Result<ReproduceSummary> {
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in configs {
        let mut cfg = cfg.clone();
        if let Some(s) = seed {
            cfg.seed = s;
        }
        let outcome = run_case(&cfg, Some(&root.join(&cfg.case_id)))?;
        let r = &outcome.report;
        let (plan, rollout, zmp, gains) = match (&r.plan, &r.rollout, &r.zmp, r.gains) {
            (Some(p), Some(ro), Some(z), Some(g)) => (p, ro, z, g),
            _ => unreachable!("a completed case has every section"),
        };
        rows.push(CaseRow {
            case_id: cfg.case_id.clone(),
            run: r.stairs.run,
            rise: r.stairs.rise,
            planned_max_jerk: plan.planned_max_jerk,
            gains,
            cost: rollout.cost,
            tracking_cost: rollout.tracking_cost,
            energy_joules: rollout.energy_joules,
            peak_torque: rollout.peak_torque,
            rollout_max_jerk: rollout.max_jerk,
            stable_fraction: zmp.stable_fraction,
            min_margin: zmp.min_margin,
        });
    }
    let mut order: Vec<&CaseRow> = rows.iter().collect();
    order.sort_by(|a, b| a.planned_max_jerk.total_cmp(&b.planned_max_jerk));
    let summary = ReproduceSummary {
        seed,
        jerk_order: order.iter().map(|r| r.case_id.clone()).collect(),
        cases: rows,
    };
    output::write_json(&root.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

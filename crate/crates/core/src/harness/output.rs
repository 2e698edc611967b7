//! CSV, JSON and plot-data files of a case run. Every float is written with
//! 17 significant digits, so files reload to bit-identical values.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::control::{RolloutResult, RolloutSample, TuneResult};
use crate::error::{Error, Result};
use crate::gait_planner::CartesianGait;
use crate::ik_network::JointTrajectory;
use crate::model::{JointVector, CONTACT_NAMES, N_CONTACTS, N_JOINTS};
use crate::stability::ZmpRecord;

pub const PLOT_DIR: &str = "plot";
pub const CONFIG_FILE: &str = "config.toml";
pub const REPORT_FILE: &str = "report.json";
pub const TIMING_FILE: &str = "timing.json";
pub const FAILURE_FILE: &str = "failure.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PLAN_FILE: &str = "plan.json";
pub const GAIT_FILE: &str = "gait.csv";
pub const TRAJECTORY_FILE: &str = "joint_trajectory.csv";
pub const TUNING_FILE: &str = "tuning_log.csv";
pub const GAINS_FILE: &str = "gains.json";
pub const ROLLOUT_FILE: &str = "rollout.csv";

/// Files whose content depends on wall-clock time.
pub const NONDETERMINISTIC_FILES: [&str; 2] = [TIMING_FILE, "plot/ik_time.dat"];

/// `x` with 17 significant digits; non-finite values as `NaN`, `inf`, `-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

struct Digits17<'a>(serde_json::ser::PrettyFormatter<'a>);

impl serde_json::ser::Formatter for Digits17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with 17-digit floats; non-finite floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(serde_json::ser::PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::InvalidParameter(format!("serialization failed: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("JSON output is UTF-8"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

/// Comma-separated table with a header row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_csv())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| parse_error(path, "empty file"))?
            .split(',')
            .map(str::to_string)
            .collect::<Vec<_>>();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != header.len() {
                return Err(parse_error(path, &format!("row {} has {} fields, expected {}", i + 1, row.len(), header.len())));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    pub fn column_f64(&self, name: &str) -> Option<Vec<f64>> {
        self.column(name)?.iter().map(|v| v.parse().ok()).collect()
    }
}

fn parse_error(path: &Path, detail: &str) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    }
}

fn joint_columns(prefix: &str) -> Vec<String> {
    (1..=N_JOINTS).map(|j| format!("{prefix}{j}")).collect()
}

fn push_joints(row: &mut Vec<String>, v: &JointVector) {
    row.extend(v.iter().map(|x| fmt_f64(*x)));
}

pub fn gait_table(gait: &CartesianGait) -> Table {
    let mut t = Table::new([
        "t", "phase", "ankle_x", "ankle_z", "sole_x", "sole_z", "toe_x", "toe_z", "hip_x", "hip_z", "theta_sole",
        "theta_toe",
    ]);
    for k in 0..gait.len() {
        let mut row = vec![fmt_f64(gait.t[k]), gait.phase[k].to_string()];
        for p in [gait.ankle[k], gait.sole[k], gait.toe[k], gait.hip[k]] {
            row.push(fmt_f64(p.x));
            row.push(fmt_f64(p.y));
        }
        row.push(fmt_f64(gait.theta_sole[k]));
        row.push(fmt_f64(gait.theta_toe[k]));
        t.push(row);
    }
    t
}

pub fn trajectory_table(traj: &JointTrajectory) -> Table {
    let mut header = vec!["t".to_string()];
    header.extend(joint_columns("q"));
    header.extend(joint_columns("qdot"));
    header.extend(
        [
            "epochs_swing",
            "epochs_stance",
            "error_swing",
            "error_stance",
            "halvings_swing",
            "halvings_stance",
        ]
        .map(String::from),
    );
    let mut t = Table::new(header);
    for k in 0..traj.len() {
        let mut row = vec![fmt_f64(traj.t[k])];
        push_joints(&mut row, &traj.q[k]);
        push_joints(&mut row, &traj.qdot[k]);
        row.extend(traj.epochs[k].iter().map(|e| e.to_string()));
        row.extend(traj.error[k].iter().map(|e| fmt_f64(*e)));
        row.extend(traj.halvings[k].iter().map(|e| e.to_string()));
        t.push(row);
    }
    t
}

pub fn tuning_table(tune: &TuneResult) -> Table {
    let mut t = Table::new(["iteration", "best_cost", "mean_cost"]);
    for l in &tune.curve {
        t.push(vec![l.iteration.to_string(), fmt_f64(l.best_cost), fmt_f64(l.mean_cost)]);
    }
    t
}

fn rollout_header() -> Vec<String> {
    let mut header = vec!["t".to_string()];
    for prefix in ["q", "qdot", "qddot", "tau", "q_des", "qdot_des"] {
        header.extend(joint_columns(prefix));
    }
    header.extend(CONTACT_NAMES.iter().map(|c| format!("fn_{c}")));
    header.extend(["ssp", "x_zmp", "zmp_min", "zmp_max", "margin"].map(String::from));
    header
}

pub fn rollout_table(rollout: &RolloutResult) -> Table {
    let mut t = Table::new(rollout_header());
    for s in &rollout.samples {
        let mut row = vec![fmt_f64(s.t)];
        for v in [&s.q, &s.qdot, &s.qddot, &s.tau, &s.q_des, &s.qdot_des] {
            push_joints(&mut row, v);
        }
        row.extend(s.normals.iter().map(|f| fmt_f64(*f)));
        row.push(u8::from(s.ssp).to_string());
        let z = s.zmp.map_or([f64::NAN; 4], |z| [z.x_zmp, z.polygon[0], z.polygon[1], z.margin]);
        row.extend(z.iter().map(|v| fmt_f64(*v)));
        t.push(row);
    }
    t
}

/// Rollout samples reloaded from `rollout.csv`.
pub fn load_rollout(path: &Path) -> Result<Vec<RolloutSample>> {
    let table = Table::read(path)?;
    if table.header != rollout_header() {
        return Err(parse_error(path, "unexpected rollout columns"));
    }
    let mut out = Vec::with_capacity(table.rows.len());
    for (i, row) in table.rows.iter().enumerate() {
        let num = |c: usize| -> Result<f64> {
            row[c]
                .parse()
                .map_err(|_| parse_error(path, &format!("row {}: `{}` is not a number", i + 1, row[c])))
        };
        let joints = |block: usize| -> Result<JointVector> {
            let mut v = JointVector::zeros();
            for j in 0..N_JOINTS {
                v[j] = num(1 + block * N_JOINTS + j)?;
            }
            Ok(v)
        };
        let base = 1 + 6 * N_JOINTS;
        let mut normals = [0.0; N_CONTACTS];
        for (c, f) in normals.iter_mut().enumerate() {
            *f = num(base + c)?;
        }
        let z = base + N_CONTACTS + 1;
        let t = num(0)?;
        let x_zmp = num(z)?;
        let zmp = (!x_zmp.is_nan()).then_some(ZmpRecord {
            t,
            x_zmp,
            polygon: [num(z + 1)?, num(z + 2)?],
            margin: num(z + 3)?,
        })
        .map(Ok)
        .transpose()?;
        out.push(RolloutSample {
            t,
            q: joints(0)?,
            qdot: joints(1)?,
            qddot: joints(2)?,
            tau: joints(3)?,
            q_des: joints(4)?,
            qdot_des: joints(5)?,
            normals,
            ssp: row[base + N_CONTACTS] == "1",
            zmp,
        });
    }
    Ok(out)
}

/// One plot-data file: two numeric columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeriesInfo {
    pub file: String,
    pub x: String,
    pub y: String,
    pub stage: &'static str,
    pub description: String,
}

fn info(file: impl Into<String>, x: &str, y: &str, stage: &'static str, description: impl Into<String>) -> SeriesInfo {
    SeriesInfo {
        file: file.into(),
        x: x.into(),
        y: y.into(),
        stage,
        description: description.into(),
    }
}

fn plan_series_info() -> Vec<SeriesInfo> {
    vec![
        info("swing_ankle.dat", "x", "z", "plan", "planned swing ankle path, m"),
        info("swing_sole.dat", "x", "z", "plan", "planned swing sole point path, m"),
        info("swing_toe.dat", "x", "z", "plan", "planned swing toe tip path, m"),
        info("hip.dat", "x", "z", "plan", "planned hip path, m"),
    ]
}

fn ik_series_info() -> Vec<SeriesInfo> {
    vec![
        info("ik_epochs_swing.dat", "pose", "epochs", "ik", "training epochs per pose, swing leg"),
        info("ik_epochs_stance.dat", "pose", "epochs", "ik", "training epochs per pose, stance leg"),
        info("ik_time.dat", "pose", "ms", "ik", "wall-clock solve time per pose (not reproducible)"),
    ]
}

fn tune_series_info() -> Vec<SeriesInfo> {
    vec![info("cost_curve.dat", "iteration", "best_cost", "tune", "best cost per tuning iteration")]
}

fn rollout_series_info() -> Vec<SeriesInfo> {
    let mut out = Vec::new();
    for j in 1..=N_JOINTS {
        out.push(info(format!("q_{j}.dat"), "t", &format!("q{j}"), "rollout", format!("joint {j} angle, rad")));
        out.push(info(
            format!("q_des_{j}.dat"),
            "t",
            &format!("q_des{j}"),
            "rollout",
            format!("joint {j} desired angle, rad"),
        ));
    }
    for j in 1..=N_JOINTS {
        out.push(info(format!("torque_{j}.dat"), "t", &format!("tau{j}"), "rollout", format!("joint {j} torque, N m")));
    }
    out.push(info("zmp.dat", "t", "x_zmp", "rollout", "ZMP x, m"));
    out.push(info("zmp_min.dat", "t", "x_min", "rollout", "support interval lower bound, m"));
    out.push(info("zmp_max.dat", "t", "x_max", "rollout", "support interval upper bound, m"));
    out.push(info("margin.dat", "t", "margin", "rollout", "ZMP stability margin, m"));
    out
}

/// Every plot-data file a full case writes.
pub fn plot_manifest() -> Vec<SeriesInfo> {
    let mut out = plan_series_info();
    out.extend(ik_series_info());
    out.extend(tune_series_info());
    out.extend(rollout_series_info());
    out
}

type Series = (Vec<f64>, Vec<f64>);

fn plan_series(gait: &CartesianGait) -> Vec<Series> {
    let xz = |pts: &[crate::model::Point]| (pts.iter().map(|p| p.x).collect(), pts.iter().map(|p| p.y).collect());
    vec![xz(&gait.ankle), xz(&gait.sole), xz(&gait.toe), xz(&gait.hip)]
}

fn ik_series(traj: &JointTrajectory) -> Vec<Series> {
    let pose: Vec<f64> = (0..traj.len()).map(|k| k as f64).collect();
    vec![
        (pose.clone(), traj.epochs.iter().map(|e| e[0] as f64).collect()),
        (pose.clone(), traj.epochs.iter().map(|e| e[1] as f64).collect()),
        (pose, traj.solve_ms.clone()),
    ]
}

fn tune_series(tune: &TuneResult) -> Vec<Series> {
    vec![(
        tune.curve.iter().map(|l| l.iteration as f64).collect(),
        tune.curve.iter().map(|l| l.best_cost).collect(),
    )]
}

fn rollout_series(rollout: &RolloutResult) -> Vec<Series> {
    let s = &rollout.samples;
    let t: Vec<f64> = s.iter().map(|x| x.t).collect();
    let mut out = Vec::new();
    for j in 0..N_JOINTS {
        out.push((t.clone(), s.iter().map(|x| x.q[j]).collect()));
        out.push((t.clone(), s.iter().map(|x| x.q_des[j]).collect()));
    }
    for j in 0..N_JOINTS {
        out.push((t.clone(), s.iter().map(|x| x.tau[j]).collect()));
    }
    let zmp: Vec<(f64, ZmpRecord)> = s.iter().filter_map(|x| x.zmp.map(|z| (x.t, z))).collect();
    let zt: Vec<f64> = zmp.iter().map(|(t, _)| *t).collect();
    for f in [
        |z: &ZmpRecord| z.x_zmp,
        |z: &ZmpRecord| z.polygon[0],
        |z: &ZmpRecord| z.polygon[1],
        |z: &ZmpRecord| z.margin,
    ] {
        out.push((zt.clone(), zmp.iter().map(|(_, z)| f(z)).collect()));
    }
    out
}

fn write_series(dir: &Path, infos: Vec<SeriesInfo>, data: Vec<Series>) -> Result<Vec<SeriesInfo>> {
    debug_assert_eq!(infos.len(), data.len());
    for (info, (xs, ys)) in infos.iter().zip(&data) {
        let mut text = format!("# {} {}\n", info.x, info.y);
        for (x, y) in xs.iter().zip(ys) {
            text.push_str(&fmt_f64(*x));
            text.push(' ');
            text.push_str(&fmt_f64(*y));
            text.push('\n');
        }
        write_text(&dir.join(PLOT_DIR).join(&info.file), &text)?;
    }
    Ok(infos)
}

pub fn write_plan_files(dir: &Path, gait: &CartesianGait) -> Result<Vec<SeriesInfo>> {
    gait_table(gait).write(&dir.join(GAIT_FILE))?;
    write_series(dir, plan_series_info(), plan_series(gait))
}

pub fn write_ik_files(dir: &Path, traj: &JointTrajectory) -> Result<Vec<SeriesInfo>> {
    trajectory_table(traj).write(&dir.join(TRAJECTORY_FILE))?;
    write_series(dir, ik_series_info(), ik_series(traj))
}

pub fn write_tuning_files(dir: &Path, tune: &TuneResult) -> Result<Vec<SeriesInfo>> {
    tuning_table(tune).write(&dir.join(TUNING_FILE))?;
    write_json(&dir.join(GAINS_FILE), &tune.gains)?;
    write_series(dir, tune_series_info(), tune_series(tune))
}

pub fn write_rollout_files(dir: &Path, rollout: &RolloutResult) -> Result<Vec<SeriesInfo>> {
    rollout_table(rollout).write(&dir.join(ROLLOUT_FILE))?;
    write_series(dir, rollout_series_info(), rollout_series(rollout))
}

/// Removes the files an earlier run may have left in `dir`.
pub fn clear_outputs(dir: &Path) -> Result<()> {
    let fixed = [
        CONFIG_FILE,
        REPORT_FILE,
        TIMING_FILE,
        FAILURE_FILE,
        MANIFEST_FILE,
        PLAN_FILE,
        GAIT_FILE,
        TRAJECTORY_FILE,
        TUNING_FILE,
        GAINS_FILE,
        ROLLOUT_FILE,
    ];
    let plots = plot_manifest().into_iter().map(|s| PathBuf::from(PLOT_DIR).join(s.file));
    for rel in fixed.iter().map(PathBuf::from).chain(plots) {
        let path = dir.join(rel);
        match fs::remove_file(&path) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(Error::io(path, e)),
        }
    }
    Ok(())
}

//! Cartesian reference gait for one swing of the stair-climbing biped.
//!
//! A swing runs over `[0, t3]` in three phases: the heel lift of double
//! support (`DSP`), a Bézier bridge onto the cycloid (`CATCH`), and the cycloid
//! itself up to its apex (`TRACK`). Coordinates are relative to the swing
//! ankle at `t = 0`.

mod hip;
mod knot_shift;
mod poly;
mod swing;
mod terrain;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use hip::{fit_hip_arc, plan_hip, HipArc, HipPlan};
pub use knot_shift::{
    fd_max_accel, fd_max_jerk, joint_jerk_objective, knot_shift_optimize, planned_joint_trajectory,
    KnotBounds, KnotShiftResult,
};
pub use poly::Cubic;
pub use swing::{
    cycloid_point, foot_orientation_cubic, plan_catch_bezier, plan_dsp, plan_swing_foot_orientation,
    solve_theta_c0, solve_theta_c_poly, CatchBezier, Cycloid, CycloidSegment, DspPlan, FootPose,
};
pub use terrain::{Staircase, SurfaceContact};

use crate::error::{Error, Result};
use crate::model::{foot_points, Point, RobotModel};

/// Workspace slack kept from full extension and full fold of a leg.
pub const WORKSPACE_MARGIN: f64 = 1e-4;
const PENETRATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StairSpec {
    /// Tread depth of one step, m.
    pub run: f64,
    /// Height of one step, m.
    pub rise: f64,
    pub n_steps: usize,
}

impl StairSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.run.is_finite() && self.run > 0.0) {
            return Err(Error::InvalidParameter(format!("stair run = {} must be > 0", self.run)));
        }
        if !(self.rise.is_finite() && self.rise > 0.0) {
            return Err(Error::InvalidParameter(format!("stair rise = {} must be > 0", self.rise)));
        }
        if self.n_steps < 1 {
            return Err(Error::InvalidParameter("n_steps must be >= 1".into()));
        }
        Ok(())
    }

    pub fn slope(&self) -> f64 {
        self.rise / self.run
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitParams {
    pub t1: f64,
    /// Reserved; carried through configs but not used by the planner.
    pub t1p: f64,
    /// Reserved; carried through configs but not used by the planner.
    pub t2p: f64,
    pub t2: f64,
    pub t_bc: f64,
    pub t3: f64,
    pub theta_a: f64,
    pub theta_b: f64,
    pub dtheta_c0: f64,
    pub z_ci: f64,
    pub dt: f64,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self::nominal()
    }
}

impl GaitParams {
    pub fn nominal() -> Self {
        Self {
            t1: 0.50,
            t1p: 0.80,
            t2p: 1.10,
            t2: 1.40,
            t_bc: 2.20,
            t3: 3.50,
            theta_a: FRAC_PI_6,
            theta_b: FRAC_PI_6,
            dtheta_c0: 0.01,
            z_ci: 0.78,
            dt: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.t1, self.t1p, self.t2p, self.t2, self.t_bc, self.t3, self.theta_a, self.theta_b,
            self.dtheta_c0, self.z_ci, self.dt,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("gait parameters must be finite".into()));
        }
        if !(0.0 < self.t1 && self.t1 < self.t2 && self.t2 < self.t_bc && self.t_bc < self.t3) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < t1 < t2 < t_bc < t3, got {} / {} / {} / {}",
                self.t1, self.t2, self.t_bc, self.t3
            )));
        }
        for (name, v) in [("theta_a", self.theta_a), ("theta_b", self.theta_b)] {
            if !(v > 0.0 && v < FRAC_PI_2) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must lie in (0, pi/2)")));
            }
        }
        if !(self.dtheta_c0 > 0.0) {
            return Err(Error::InvalidParameter(format!("dtheta_c0 = {} must be > 0", self.dtheta_c0)));
        }
        if !(self.z_ci > 0.0) {
            return Err(Error::InvalidParameter(format!("z_ci = {} must be > 0", self.z_ci)));
        }
        if !(self.dt > 0.0 && self.dt < self.t3) {
            return Err(Error::InvalidParameter(format!("dt = {} must lie in (0, t3)", self.dt)));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.t3 / self.dt).round() as usize + 1
    }
}

/// First step from level ground, or a later swing that skips one tread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    First,
    Subsequent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Dsp,
    Catch,
    Track,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Dsp => "DSP",
            Phase::Catch => "CATCH",
            Phase::Track => "TRACK",
        })
    }
}

impl std::str::FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "DSP" => Ok(Phase::Dsp),
            "CATCH" => Ok(Phase::Catch),
            "TRACK" => Ok(Phase::Track),
            other => Err(Error::InvalidParameter(format!("unknown phase label `{other}`"))),
        }
    }
}

/// Where the feet and hip sit for one swing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLayout {
    /// Swing ankle displacement from lift-off to the cycloid apex base.
    pub travel: Point,
    pub radius: f64,
    pub stance_anchor: Point,
    pub hip_start: Point,
    pub hip_end: Point,
    pub zmp_initial: f64,
    pub zmp_final: f64,
    pub terrain: Staircase,
}

/// Feet land ball-first, so each tread's nosing sits under the landing toe.
/// The stance foot occupies the same spot on its tread as the swing foot
/// does on its own, one run ahead and one rise up.
pub fn step_layout(
    stairs: &StairSpec,
    model: &RobotModel,
    params: &GaitParams,
    kind: StepKind,
) -> StepLayout {
    let (run, rise) = (stairs.run, stairs.rise);
    let foot = model.foot_length();
    let toe_reach = model.sole() + model.toe() * params.theta_b.cos();
    match kind {
        StepKind::First => {
            let nosing = run + toe_reach;
            StepLayout {
                travel: Point::new(run, rise),
                radius: 0.5 * rise,
                stance_anchor: Point::zeros(),
                hip_start: Point::new(0.0, params.z_ci),
                hip_end: Point::new(0.5 * run, params.z_ci),
                zmp_initial: 0.25 * foot,
                zmp_final: 0.75 * foot,
                terrain: Staircase {
                    base: 0.0,
                    rise,
                    risers: vec![nosing],
                },
            }
        }
        StepKind::Subsequent => {
            let nosing = 2.0 * run + toe_reach;
            StepLayout {
                travel: Point::new(2.0 * run, 2.0 * rise),
                radius: rise,
                stance_anchor: Point::new(run, rise),
                hip_start: Point::new(0.5 * run, params.z_ci),
                hip_end: Point::new(1.5 * run, params.z_ci + rise),
                zmp_initial: run + 0.25 * foot,
                zmp_final: run + 0.75 * foot,
                terrain: Staircase {
                    base: -rise,
                    rise,
                    risers: vec![nosing - 2.0 * run, nosing - run, nosing],
                },
            }
        }
    }
}

/// Analytic pieces of a planned swing, evaluable at any time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitPieces {
    pub dsp: DspPlan,
    pub catch: CatchBezier,
    pub track: CycloidSegment,
    pub sole_ssp: Cubic,
    pub toe_ssp: Cubic,
    pub hip: HipPlan,
}

impl GaitPieces {
    pub fn phase_at(&self, t: f64) -> Phase {
        if t <= self.dsp.t2 {
            Phase::Dsp
        } else if t <= self.catch.t_bc {
            Phase::Catch
        } else {
            Phase::Track
        }
    }

    /// Swing ankle from the formula of `phase`, also outside its interval.
    pub fn ankle_in_phase(&self, phase: Phase, t: f64) -> Point {
        match phase {
            Phase::Dsp => self.dsp.pose(t).ankle,
            Phase::Catch => self.catch.point(t),
            Phase::Track => self.track.point(t),
        }
    }

    pub fn ankle_velocity_in_phase(&self, phase: Phase, t: f64) -> Point {
        match phase {
            Phase::Dsp => self.dsp.ankle_velocity(t),
            Phase::Catch => self.catch.velocity(t),
            Phase::Track => self.track.velocity(t),
        }
    }

    pub fn foot_in_phase(&self, phase: Phase, t: f64, l6: f64, l7: f64) -> FootPose {
        if phase == Phase::Dsp {
            return self.dsp.pose(t);
        }
        let ankle = self.ankle_in_phase(phase, t);
        let theta_sole = self.sole_ssp.eval(t);
        let theta_toe = self.toe_ssp.eval(t);
        let (sole, toe) = foot_points(ankle, theta_sole, theta_toe, l6, l7);
        FootPose {
            ankle,
            sole,
            toe,
            theta_sole,
            theta_toe,
        }
    }

    pub fn foot(&self, t: f64, l6: f64, l7: f64) -> FootPose {
        self.foot_in_phase(self.phase_at(t), t, l6, l7)
    }
}

/// Time-sampled swing plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartesianGait {
    pub kind: StepKind,
    pub stairs: StairSpec,
    pub params: GaitParams,
    pub layout: StepLayout,
    pub pieces: GaitPieces,
    pub t: Vec<f64>,
    pub ankle: Vec<Point>,
    pub sole: Vec<Point>,
    pub toe: Vec<Point>,
    pub hip: Vec<Point>,
    pub theta_sole: Vec<f64>,
    pub theta_toe: Vec<f64>,
    pub phase: Vec<Phase>,
}

impl CartesianGait {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn stance_anchor(&self) -> Point {
        self.layout.stance_anchor
    }

    pub fn terrain(&self) -> &Staircase {
        &self.layout.terrain
    }
}

/// Builds and samples the swing plan, checking workspace and ground clearance.
pub fn assemble_gait(
    stairs: &StairSpec,
    model: &RobotModel,
    params: &GaitParams,
    kind: StepKind,
) -> Result<CartesianGait> {
    stairs.validate()?;
    model.validate()?;
    params.validate()?;
    let (l6, l7) = (model.sole(), model.toe());
    let layout = step_layout(stairs, model, params, kind);
    let pieces = plan_pieces(&layout, stairs, model, params)?;

    let n = params.n_samples();
    let mut gait = CartesianGait {
        kind,
        stairs: *stairs,
        params: *params,
        layout,
        pieces,
        t: Vec::with_capacity(n),
        ankle: Vec::with_capacity(n),
        sole: Vec::with_capacity(n),
        toe: Vec::with_capacity(n),
        hip: Vec::with_capacity(n),
        theta_sole: Vec::with_capacity(n),
        theta_toe: Vec::with_capacity(n),
        phase: Vec::with_capacity(n),
    };
    let reach_max = model.leg_length() - WORKSPACE_MARGIN;
    let reach_min = (model.thigh() - model.shank()).abs() + WORKSPACE_MARGIN;
    let anchor = gait.layout.stance_anchor;
    for k in 0..n {
        let t = if k + 1 == n { params.t3 } else { k as f64 * params.dt };
        let phase = pieces.phase_at(t);
        let foot = pieces.foot_in_phase(phase, t, l6, l7);
        let hip = pieces.hip.position(t);
        for (leg, target) in [("swing", foot.ankle), ("stance", anchor)] {
            let d = (target - hip).norm();
            if !(d <= reach_max && d >= reach_min) {
                return Err(Error::Workspace {
                    index: k,
                    t,
                    detail: format!(
                        "{leg} ankle at distance {d:.6} m from hip, reachable [{reach_min:.4}, {reach_max:.4}]"
                    ),
                });
            }
        }
        for (name, p) in [("sole", foot.sole), ("toe", foot.toe)] {
            let ground = gait.layout.terrain.height(p.x);
            if p.y < ground - PENETRATION_TOL {
                return Err(Error::GroundPenetration {
                    index: k,
                    t,
                    detail: format!(
                        "swing {name} at ({:.4}, {:.4}) is {:.3e} m below the step surface",
                        p.x,
                        p.y,
                        ground - p.y
                    ),
                });
            }
        }
        gait.t.push(t);
        gait.ankle.push(foot.ankle);
        gait.sole.push(foot.sole);
        gait.toe.push(foot.toe);
        gait.hip.push(hip);
        gait.theta_sole.push(foot.theta_sole);
        gait.theta_toe.push(foot.theta_toe);
        gait.phase.push(phase);
    }
    Ok(gait)
}

fn plan_pieces(
    layout: &StepLayout,
    stairs: &StairSpec,
    model: &RobotModel,
    params: &GaitParams,
) -> Result<GaitPieces> {
    let dsp = plan_dsp(params, model.sole(), model.toe())?;
    let lift = dsp.pose(params.t2);
    let r = layout.radius;
    let dx_c = layout.travel.x - lift.ankle.x;
    let cycloid = Cycloid {
        r,
        theta_c0: solve_theta_c0(r, dx_c),
        origin: Point::new(layout.travel.x - PI * r, lift.ankle.y),
    };
    let catch = plan_catch_bezier(lift.ankle, &cycloid, params.dtheta_c0, params.t2, params.t_bc)?;
    let theta = solve_theta_c_poly(
        catch.theta_c4,
        catch.theta_dot_bc,
        params.t_bc,
        params.t3,
        r,
        model.gravity,
    )?;
    let track = CycloidSegment {
        cycloid,
        theta,
        t_bc: params.t_bc,
        t3: params.t3,
    };
    if !track.is_monotone() {
        return Err(Error::NonMonotoneCycloid(format!(
            "theta_c rate dips to {:.4} rad/s on [{}, {}] (apex rate {:.4} rad/s)",
            theta.min_rate(params.t_bc, params.t3),
            params.t_bc,
            params.t3,
            (model.gravity / r).sqrt()
        )));
    }
    let sole_ssp = foot_orientation_cubic(lift.theta_sole, lift.theta_sole, params.t2, params.t3)?;
    let toe_ssp = plan_swing_foot_orientation(lift.theta_toe, params.t2, params.t3)?;
    let mut hip = plan_hip(
        layout.zmp_initial,
        layout.zmp_final,
        layout.hip_start.x,
        layout.hip_end.x,
        layout.hip_start,
        layout.hip_end,
        params.z_ci,
        params.t3,
        model.gravity,
    )?;
    hip.k_slope = stairs.slope();
    Ok(GaitPieces {
        dsp,
        catch,
        track,
        sole_ssp,
        toe_ssp,
        hip,
    })
}

//! Search over segment boundary times and shape angles for the plan with the
//! smallest peak joint jerk.

use nalgebra::SVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{assemble_gait, CartesianGait, GaitParams, StairSpec, StepKind};
use crate::error::{Error, Result};
use crate::model::{two_link_ik, JointVector, RobotModel};

const ROUNDS: usize = 3;
const GRID: usize = 7;
const RANDOM_STARTS: usize = 256;

/// Closed intervals for the searched parameters. The two reserved times are
/// bounded for validation only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnotBounds {
    pub t1: [f64; 2],
    pub t1p: [f64; 2],
    pub t2p: [f64; 2],
    pub t2: [f64; 2],
    pub t_bc: [f64; 2],
    pub t3: [f64; 2],
    pub theta_a: [f64; 2],
    pub theta_b: [f64; 2],
    pub dtheta_c0: [f64; 2],
    pub z_ci: [f64; 2],
}

impl Default for KnotBounds {
    fn default() -> Self {
        Self {
            t1: [0.3, 0.8],
            t1p: [0.5, 1.2],
            t2p: [0.8, 1.5],
            t2: [0.9, 1.8],
            t_bc: [1.5, 2.8],
            t3: [2.4, 4.0],
            theta_a: [0.3, 0.8],
            theta_b: [0.3, 0.8],
            dtheta_c0: [0.005, 0.05],
            z_ci: [0.55, 0.79],
        }
    }
}

impl KnotBounds {
    /// Every bound collapsed onto `p`.
    pub fn point(p: &GaitParams) -> Self {
        Self {
            t1: [p.t1; 2],
            t1p: [p.t1p; 2],
            t2p: [p.t2p; 2],
            t2: [p.t2; 2],
            t_bc: [p.t_bc; 2],
            t3: [p.t3; 2],
            theta_a: [p.theta_a; 2],
            theta_b: [p.theta_b; 2],
            dtheta_c0: [p.dtheta_c0; 2],
            z_ci: [p.z_ci; 2],
        }
    }

    fn searched(&self) -> [[f64; 2]; 8] {
        [
            self.t1,
            self.t2,
            self.t_bc,
            self.t3,
            self.theta_a,
            self.theta_b,
            self.dtheta_c0,
            self.z_ci,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.t1p, self.t2p]
            .into_iter()
            .chain(self.searched());
        for b in all {
            if !(b[0].is_finite() && b[1].is_finite() && b[0] <= b[1]) {
                return Err(Error::InvalidParameter(format!("bad knot-shift interval {b:?}")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &GaitParams) -> bool {
        let inside = |b: [f64; 2], v: f64| v >= b[0] && v <= b[1];
        inside(self.t1p, p.t1p) && inside(self.t2p, p.t2p) && {
            let v = to_vec(p);
            self.searched().iter().zip(v).all(|(b, x)| inside(*b, x))
        }
    }
}

fn to_vec(p: &GaitParams) -> [f64; 8] {
    [p.t1, p.t2, p.t_bc, p.t3, p.theta_a, p.theta_b, p.dtheta_c0, p.z_ci]
}

fn from_vec(base: &GaitParams, v: &[f64; 8]) -> GaitParams {
    GaitParams {
        t1: v[0],
        t2: v[1],
        t_bc: v[2],
        t3: v[3],
        theta_a: v[4],
        theta_b: v[5],
        dtheta_c0: v[6],
        z_ci: v[7],
        ..*base
    }
}

/// Joint trajectory of a plan from closed-form leg inverse kinematics.
pub fn planned_joint_trajectory(
    gait: &CartesianGait,
    model: &RobotModel,
    torso_pitch: f64,
) -> Result<Vec<JointVector>> {
    let (l1, l2) = (model.thigh(), model.shank());
    let anchor = gait.stance_anchor();
    let mut out = Vec::with_capacity(gait.len());
    for k in 0..gait.len() {
        let hip = gait.hip[k];
        let unreachable = |leg: &str| Error::Workspace {
            index: k,
            t: gait.t[k],
            detail: format!("{leg} ankle outside the two-link workspace"),
        };
        let (q1, q2) = two_link_ik(hip, gait.ankle[k], l1, l2).ok_or_else(|| unreachable("swing"))?;
        let (q3, q4) = two_link_ik(hip, anchor, l1, l2).ok_or_else(|| unreachable("stance"))?;
        out.push(JointVector::from_column_slice(&[
            q1,
            q2,
            q3,
            q4,
            torso_pitch,
            gait.theta_sole[k],
            gait.theta_toe[k],
            0.0,
            0.0,
        ]));
    }
    Ok(out)
}

/// Largest second difference over samples and components, divided by `dt²`.
pub fn fd_max_accel<const D: usize>(samples: &[SVector<f64, D>], dt: f64) -> f64 {
    samples
        .windows(3)
        .map(|w| ((w[2] - 2.0 * w[1] + w[0]) / (dt * dt)).amax())
        .fold(0.0, f64::max)
}

/// Largest third difference over samples and components, divided by `dt³`.
pub fn fd_max_jerk<const D: usize>(samples: &[SVector<f64, D>], dt: f64) -> f64 {
    samples
        .windows(4)
        .map(|w| ((w[3] - 3.0 * w[2] + 3.0 * w[1] - w[0]) / (dt * dt * dt)).amax())
        .fold(0.0, f64::max)
}

/// Peak joint jerk of the plan built from `params`.
pub fn joint_jerk_objective(
    stairs: &StairSpec,
    model: &RobotModel,
    params: &GaitParams,
    kind: StepKind,
) -> Result<f64> {
    let gait = assemble_gait(stairs, model, params, kind)?;
    let q = planned_joint_trajectory(&gait, model, 0.0)?;
    Ok(fd_max_jerk(&q, params.dt))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnotShiftResult {
    pub params: GaitParams,
    pub objective: f64,
    pub evaluations: usize,
}

/// Multi-start coordinate descent on a refining grid. `base` supplies the
/// reserved fields and the sampling step; it is also tried as a start when
/// it lies inside `bounds`.
pub fn knot_shift_optimize(
    stairs: &StairSpec,
    model: &RobotModel,
    kind: StepKind,
    bounds: &KnotBounds,
    base: &GaitParams,
    seed: u64,
) -> Result<KnotShiftResult> {
    bounds.validate()?;
    let b = bounds.searched();
    let eval = |v: &[f64; 8]| -> f64 {
        joint_jerk_objective(stairs, model, &from_vec(base, v), kind).unwrap_or(f64::INFINITY)
    };

    let mut starts: Vec<[f64; 8]> = Vec::with_capacity(RANDOM_STARTS + 2);
    let base_v = to_vec(base);
    if b.iter().zip(base_v).all(|(i, x)| x >= i[0] && x <= i[1]) {
        starts.push(base_v);
    }
    starts.push(std::array::from_fn(|i| 0.5 * (b[i][0] + b[i][1])));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_STARTS {
        starts.push(std::array::from_fn(|i| {
            let [lo, hi] = b[i];
            if hi > lo {
                rng.gen_range(lo..=hi)
            } else {
                lo
            }
        }));
    }
    let costs: Vec<f64> = starts.par_iter().map(eval).collect();
    let mut evaluations = starts.len();
    let (mut best, mut best_cost) = (starts[0], costs[0]);
    for (v, c) in starts.iter().zip(&costs) {
        if *c < best_cost {
            best = *v;
            best_cost = *c;
        }
    }
    if !best_cost.is_finite() {
        return Err(Error::Infeasible(format!(
            "none of {evaluations} knot-shift starts gives a valid plan"
        )));
    }

    for round in 0..ROUNDS {
        let shrink = 3f64.powi(round as i32);
        for dim in 0..8 {
            let [lo, hi] = b[dim];
            if hi <= lo {
                continue;
            }
            let half = 0.5 * (hi - lo) / shrink;
            let (a, z) = if round == 0 {
                (lo, hi)
            } else {
                ((best[dim] - half).max(lo), (best[dim] + half).min(hi))
            };
            let trial: Vec<[f64; 8]> = (0..GRID)
                .map(|i| {
                    let mut v = best;
                    v[dim] = a + (z - a) * i as f64 / (GRID - 1) as f64;
                    v
                })
                .collect();
            let costs: Vec<f64> = trial.par_iter().map(eval).collect();
            evaluations += trial.len();
            for (v, c) in trial.iter().zip(costs) {
                if c < best_cost {
                    best = *v;
                    best_cost = c;
                }
            }
        }
    }
    Ok(KnotShiftResult {
        params: from_vec(base, &best),
        objective: best_cost,
        evaluations,
    })
}

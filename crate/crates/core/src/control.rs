//! PD joint control, closed-loop rollouts through the contact dynamics, and
//! archive-based continuous ant colony tuning of gains and torso pitch.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{gravity_vector, ContactParams, JointDrive, SimState, Simulator};
use crate::error::{Error, Result};
use crate::gait_planner::{CartesianGait, Phase};
use crate::ik_network::JointTrajectory;
use crate::model::{link_com_states_with, JointState, JointVector, Point, Pose, RobotModel, N_CONTACTS, N_JOINTS};
use crate::stability::{zmp_record, Support, ZmpRecord};

pub const TORSO_JOINT: usize = 4;
/// Stance toe and sole, which rest on the tread with the anchor.
const STANCE_FOOT_CONTACTS: [usize; 2] = [3, 4];
/// Height above the ground within which a stance-foot point rests on it, m.
pub const RESTING_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    pub k_p: [f64; N_JOINTS],
    pub k_d: [f64; N_JOINTS],
    pub q5_torso: f64,
}

impl ControllerGains {
    pub fn shared(k_p: f64, k_d: f64, q5_torso: f64) -> Self {
        Self {
            k_p: [k_p; N_JOINTS],
            k_d: [k_d; N_JOINTS],
            q5_torso,
        }
    }

    pub fn is_shared(&self) -> bool {
        self.k_p.iter().all(|k| *k == self.k_p[0]) && self.k_d.iter().all(|k| *k == self.k_d[0])
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.k_p.iter().chain(self.k_d.iter()).all(|k| k.is_finite() && *k >= 0.0);
        if !ok || !self.q5_torso.is_finite() {
            return Err(Error::InvalidParameter(format!("gains must be finite and non-negative: {self:?}")));
        }
        Ok(())
    }
}

/// `τ_j = K_p,j (q_des,j − q_j) + K_d,j (q̇_des,j − q̇_j)`.
pub fn pd_torque(
    gains: &ControllerGains,
    q_des: &JointVector,
    q: &JointVector,
    qdot_des: &JointVector,
    qdot: &JointVector,
) -> JointVector {
    JointVector::from_fn(|j, _| gains.k_p[j] * (q_des[j] - q[j]) + gains.k_d[j] * (qdot_des[j] - qdot[j]))
}

/// Uniform joint torque `(1/70) sin(2t)`.
pub fn disturbance_torque(t: f64) -> f64 {
    (2.0 * t).sin() / 70.0
}

/// Torque added to the PD law at every sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedforward {
    None,
    /// `G(q_des)`, the gravity load of the desired pose.
    Gravity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RolloutSettings {
    pub disturbance: bool,
    pub feedforward: Feedforward,
    /// Use the virtual-slope term in the ZMP denominator.
    pub zmp_k_term: bool,
    /// Cost added per supported sample whose ZMP leaves the support interval.
    pub penalty: f64,
}

impl Default for RolloutSettings {
    fn default() -> Self {
        Self {
            disturbance: false,
            feedforward: Feedforward::None,
            zmp_k_term: true,
            penalty: 100.0,
        }
    }
}

/// Desired joint motion on the reporting grid, with single-support labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub dt: f64,
    pub t: Vec<f64>,
    pub q: Vec<JointVector>,
    pub qdot: Vec<JointVector>,
    pub ssp: Vec<bool>,
    pub k_slope: f64,
}

impl Reference {
    pub fn from_gait(traj: &JointTrajectory, gait: &CartesianGait) -> Self {
        Self {
            dt: gait.params.dt,
            t: traj.t.clone(),
            q: traj.q.clone(),
            qdot: traj.qdot.clone(),
            ssp: gait.phase.iter().map(|p| *p != Phase::Dsp).collect(),
            k_slope: gait.stairs.slope(),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Desired state at sample `k` with the torso set to the tuned pitch.
    pub fn desired(&self, k: usize, q5_torso: f64) -> (JointVector, JointVector) {
        let mut q = self.q[k];
        q[TORSO_JOINT] = q5_torso;
        let mut qdot = self.qdot[k];
        qdot[TORSO_JOINT] = 0.0;
        (q, qdot)
    }

    /// Perfect-tracking start for the given torso pitch.
    pub fn initial_state(&self, q5_torso: f64) -> SimState {
        let (q, qdot) = self.desired(0, q5_torso);
        SimState::new(q, qdot, self.t[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutSample {
    pub t: f64,
    pub q: JointVector,
    pub qdot: JointVector,
    pub qddot: JointVector,
    pub tau: JointVector,
    pub q_des: JointVector,
    pub qdot_des: JointVector,
    pub normals: [f64; N_CONTACTS],
    pub ssp: bool,
    /// Absent while the robot has no support or is in free fall.
    pub zmp: Option<ZmpRecord>,
}

impl RolloutSample {
    pub fn tracking_cost(&self) -> f64 {
        (0..N_JOINTS)
            .map(|j| (self.q[j] - self.q_des[j]).abs() + (self.qdot[j] - self.qdot_des[j]).abs())
            .sum()
    }

    pub fn power(&self) -> f64 {
        (0..N_JOINTS).map(|j| (self.tau[j] * self.qdot[j]).abs()).sum()
    }

    pub fn violates_zmp(&self) -> bool {
        self.zmp.is_some_and(|z| z.margin < 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutSummary {
    pub feasible: bool,
    pub cost: f64,
    pub tracking_cost: f64,
    pub power_cost: f64,
    pub penalty_cost: f64,
    pub violations: usize,
    /// `Σ_k Σ_j |τ q̇|`, not multiplied by the step.
    pub energy: f64,
    /// The same sum times the step, J.
    pub energy_joules: f64,
    pub peak_torque: f64,
    pub max_accel: f64,
    pub max_jerk: f64,
    pub supported_ssp: usize,
    pub stable_ssp: usize,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    pub summary: RolloutSummary,
    pub samples: Vec<RolloutSample>,
}

impl RolloutResult {
    pub fn cost(&self) -> f64 {
        self.summary.cost
    }

    /// Share of supported single-support samples with a non-negative margin.
    pub fn stable_ssp_fraction(&self) -> f64 {
        if self.summary.supported_ssp == 0 {
            return 0.0;
        }
        self.summary.stable_ssp as f64 / self.summary.supported_ssp as f64
    }
}

/// Recomputes every summary figure from the sample traces.
pub fn summarize(samples: &[RolloutSample], dt: f64, penalty: f64, failure: Option<String>) -> RolloutSummary {
    let mut tracking = 0.0;
    let mut power = 0.0;
    let mut violations = 0;
    let mut peak: f64 = 0.0;
    let mut max_accel: f64 = 0.0;
    let mut max_jerk: f64 = 0.0;
    let mut supported_ssp = 0;
    let mut stable_ssp = 0;
    for (k, s) in samples.iter().enumerate() {
        tracking += s.tracking_cost();
        power += s.power();
        if s.violates_zmp() {
            violations += 1;
        }
        if s.ssp {
            if let Some(z) = s.zmp {
                supported_ssp += 1;
                if z.margin >= 0.0 {
                    stable_ssp += 1;
                }
            }
        }
        peak = peak.max(s.tau.amax());
        max_accel = max_accel.max(s.qddot.amax());
        if k > 0 {
            max_jerk = max_jerk.max(((s.qddot - samples[k - 1].qddot) / dt).amax());
        }
    }
    let feasible = failure.is_none();
    let penalty_cost = penalty * violations as f64;
    RolloutSummary {
        feasible,
        cost: if feasible { tracking + power + penalty_cost } else { f64::INFINITY },
        tracking_cost: tracking,
        power_cost: power,
        penalty_cost,
        violations,
        energy: power,
        energy_joules: power * dt,
        peak_torque: peak,
        max_accel,
        max_jerk,
        supported_ssp,
        stable_ssp,
        failure,
    }
}

/// Simulator and model bundled for repeated rollouts on one staircase.
#[derive(Debug, Clone)]
pub struct Plant {
    pub model: RobotModel,
    pub sim: Simulator,
}

impl Plant {
    pub fn new(model: &RobotModel, contact: ContactParams, gait: &CartesianGait) -> Self {
        Self {
            model: model.clone(),
            sim: Simulator::new(model, contact, gait.terrain().clone(), gait.stance_anchor()),
        }
    }

    fn sample(
        &self,
        state: &SimState,
        tau: &JointVector,
        desired: (JointVector, JointVector),
        ssp: bool,
        k_slope: f64,
    ) -> Result<RolloutSample> {
        let (qddot, forces) = self.sim.acceleration(state, tau)?;
        let normals: [f64; N_CONTACTS] = std::array::from_fn(|c| forces.support(c));
        // heights measured from the plane of the flat stance foot
        let plane_anchor = Point::new(self.sim.anchor.x, 0.0);
        let links = link_com_states_with(
            &self.sim.chain,
            &JointState::new(state.q, state.qdot),
            &qddot,
            plane_anchor,
        );
        let pose = Pose::new(&state.q);
        let world = self.sim.chain.contact_positions(&pose, self.sim.anchor);
        let lift = Point::new(0.0, self.sim.anchor.y);
        let points: [Point; N_CONTACTS] = std::array::from_fn(|c| world[c] - lift);
        let anchored: Vec<Point> = STANCE_FOOT_CONTACTS
            .iter()
            .filter(|&&c| world[c].y - self.sim.ground.height(world[c].x) <= RESTING_TOLERANCE)
            .map(|&c| points[c])
            .collect();
        let support = Support {
            points: &points,
            normals: &normals,
            anchor: plane_anchor,
            anchored: &anchored,
        };
        let zmp = zmp_record(state.t, &links, &self.sim.chain.masses, self.sim.chain.gravity, k_slope, &support).ok();
        Ok(RolloutSample {
            t: state.t,
            q: state.q,
            qdot: state.qdot,
            qddot,
            tau: *tau,
            q_des: desired.0,
            qdot_des: desired.1,
            normals,
            ssp,
            zmp,
        })
    }
}

/// Tracks the reference from `initial` under PD control. A failed step ends
/// the rollout with the traces so far and an infinite cost.
pub fn rollout(
    gains: &ControllerGains,
    reference: &Reference,
    initial: &SimState,
    plant: &Plant,
    settings: &RolloutSettings,
) -> RolloutResult {
    let n = reference.len();
    let k_slope = if settings.zmp_k_term { reference.k_slope } else { 0.0 };
    let mut samples = Vec::with_capacity(n);
    let mut state = *initial;
    let mut failure = None;
    for k in 0..n {
        state.t = reference.t[k];
        let desired = reference.desired(k, gains.q5_torso);
        let drive = JointDrive {
            k_p: JointVector::from_row_slice(&gains.k_p),
            k_d: JointVector::from_row_slice(&gains.k_d),
            q_des: desired.0,
            qdot_des: desired.1,
        };
        let mut feedforward = match settings.feedforward {
            Feedforward::None => JointVector::zeros(),
            Feedforward::Gravity => gravity_vector(&desired.0, &plant.model),
        };
        if settings.disturbance {
            feedforward.add_scalar_mut(disturbance_torque(state.t));
        }
        let tau = pd_torque(gains, &desired.0, &state.q, &desired.1, &state.qdot) + feedforward;
        match plant.sample(&state, &tau, desired, reference.ssp[k], k_slope) {
            Ok(s) => samples.push(s),
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
        if k + 1 < n {
            // the PD law is integrated implicitly; tau above is its value at the sample
            match plant.sim.step_driven(&state, &feedforward, Some(&drive), reference.dt) {
                Ok((next, _)) => state = next,
                Err(e) => {
                    failure = Some(e.to_string());
                    break;
                }
            }
        }
    }
    RolloutResult {
        summary: summarize(&samples, reference.dt, settings.penalty, failure),
        samples,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainBounds {
    pub k_p: [f64; 2],
    pub k_d: [f64; 2],
    pub q5_torso: [f64; 2],
}

impl Default for GainBounds {
    fn default() -> Self {
        Self {
            k_p: [0.0, 200.0],
            k_d: [0.0, 200.0],
            q5_torso: [1.0, 1.5],
        }
    }
}

/// How the evaporation rate sets the sampling width multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelWidth {
    /// Width multiplier `ρ`.
    Evaporation,
    /// Width multiplier `1 − ρ`.
    Complement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcoConfig {
    pub n_ants: usize,
    pub n_iterations: usize,
    pub evaporation: f64,
    pub kernel_width: KernelWidth,
    pub seed: u64,
    pub bounds: GainBounds,
    pub archive_size: usize,
    /// Rank-weight locality of the archive.
    pub locality: f64,
    pub zmp_penalty: f64,
    /// Tune one (K_p, K_d) pair per joint instead of a shared pair.
    pub per_joint: bool,
}

impl Default for AcoConfig {
    fn default() -> Self {
        Self {
            n_ants: 30,
            n_iterations: 100,
            evaporation: 0.7,
            kernel_width: KernelWidth::Evaporation,
            seed: 0,
            bounds: GainBounds::default(),
            archive_size: 30,
            locality: 0.1,
            zmp_penalty: 100.0,
            per_joint: false,
        }
    }
}

impl AcoConfig {
    pub fn validate(&self) -> Result<()> {
        let b = &self.bounds;
        let bounds_ok = [b.k_p, b.k_d, b.q5_torso]
            .iter()
            .all(|[lo, hi]| lo.is_finite() && hi.is_finite() && lo < hi);
        let gains_ok = b.k_p[0] >= 0.0 && b.k_d[0] >= 0.0;
        if self.n_ants < 2
            || self.n_iterations == 0
            || self.archive_size < 2
            || !(self.evaporation > 0.0 && self.evaporation < 1.0)
            || !(self.locality > 0.0)
            || !(self.zmp_penalty >= 0.0)
            || !bounds_ok
            || !gains_ok
        {
            return Err(Error::InvalidParameter(format!("invalid ACO settings: {self:?}")));
        }
        Ok(())
    }

    /// Per-dimension bounds of the decision vector.
    pub fn dimension_bounds(&self) -> Vec<[f64; 2]> {
        let b = &self.bounds;
        let pairs = if self.per_joint { N_JOINTS } else { 1 };
        let mut out = vec![b.k_p; pairs];
        out.extend(std::iter::repeat_n(b.k_d, pairs));
        out.push(b.q5_torso);
        out
    }

    /// Multiplier of the archive spread in the sampling width.
    pub fn width_multiplier(&self) -> f64 {
        match self.kernel_width {
            KernelWidth::Evaporation => self.evaporation,
            KernelWidth::Complement => 1.0 - self.evaporation,
        }
    }

    pub fn gains_from(&self, x: &[f64]) -> ControllerGains {
        let pairs = if self.per_joint { N_JOINTS } else { 1 };
        let q5 = x[2 * pairs];
        if self.per_joint {
            ControllerGains {
                k_p: std::array::from_fn(|j| x[j]),
                k_d: std::array::from_fn(|j| x[pairs + j]),
                q5_torso: q5,
            }
        } else {
            ControllerGains::shared(x[0], x[1], q5)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub best_cost: f64,
    /// Mean over the finite candidate costs of the iteration.
    pub mean_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcoResult {
    pub best: Vec<f64>,
    pub best_cost: f64,
    pub curve: Vec<IterationLog>,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
struct Entry {
    x: Vec<f64>,
    cost: f64,
}

fn sort_archive(archive: &mut [Entry]) {
    archive.sort_by(|a, b| a.cost.total_cmp(&b.cost));
}

/// RNG of one candidate, fixed by (seed, iteration, ant) alone.
fn candidate_rng(seed: u64, iteration: usize, ant: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((iteration as u64) << 32) | ant as u64);
    rng
}

fn mean_finite(costs: &[f64]) -> f64 {
    let finite: Vec<f64> = costs.iter().copied().filter(|c| c.is_finite()).collect();
    if finite.is_empty() {
        f64::INFINITY
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    }
}

/// Continuous ant colony minimization over a box. The archive starts from the
/// box midpoint plus uniform samples; every iteration each ant picks an
/// archive member by rank weight and samples around it with a per-dimension
/// Gaussian whose width is the width multiplier times that member's mean
/// distance to the rest of the archive. The archive keeps the best solutions seen.
pub fn aco_minimize<F>(config: &AcoConfig, bounds: &[[f64; 2]], objective: F) -> Result<AcoResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    if bounds.is_empty() || bounds.iter().any(|[lo, hi]| !(lo < hi)) {
        return Err(Error::InvalidParameter(format!("degenerate search box {bounds:?}")));
    }
    let dim = bounds.len();
    let midpoint: Vec<f64> = bounds.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect();
    let mid_cost = objective(&midpoint);
    if !mid_cost.is_finite() {
        return Err(Error::Infeasible(format!("objective is not finite at the box midpoint {midpoint:?}")));
    }
    let starts: Vec<Vec<f64>> = (1..config.archive_size)
        .map(|a| {
            let mut rng = candidate_rng(config.seed, 0, a);
            bounds.iter().map(|[lo, hi]| rng.gen_range(*lo..=*hi)).collect()
        })
        .collect();
    let start_costs: Vec<f64> = starts.par_iter().map(|x| objective(x)).collect();
    let mut archive: Vec<Entry> = std::iter::once(Entry {
        x: midpoint,
        cost: mid_cost,
    })
    .chain(starts.into_iter().zip(start_costs).map(|(x, cost)| Entry { x, cost }))
    .collect();
    sort_archive(&mut archive);
    let mut evaluations = config.archive_size;

    let k = config.archive_size as f64;
    let q = config.locality;
    let weights: Vec<f64> = (0..config.archive_size)
        .map(|l| (-(l as f64).powi(2) / (2.0 * q * q * k * k)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let xi = config.width_multiplier();

    let mut curve = Vec::with_capacity(config.n_iterations);
    for iteration in 1..=config.n_iterations {
        let sigmas: Vec<Vec<f64>> = (0..archive.len())
            .map(|l| {
                (0..dim)
                    .map(|i| {
                        let spread: f64 = archive.iter().map(|e| (e.x[i] - archive[l].x[i]).abs()).sum();
                        xi * spread / (k - 1.0)
                    })
                    .collect()
            })
            .collect();
        let candidates: Vec<Vec<f64>> = (0..config.n_ants)
            .map(|ant| {
                let mut rng = candidate_rng(config.seed, iteration, ant);
                let mut pick = rng.gen_range(0.0..total);
                let mut guide = archive.len() - 1;
                for (l, w) in weights.iter().enumerate() {
                    if pick < *w {
                        guide = l;
                        break;
                    }
                    pick -= w;
                }
                (0..dim)
                    .map(|i| {
                        let [lo, hi] = bounds[i];
                        let centre = archive[guide].x[i];
                        let sigma = sigmas[guide][i];
                        let v = if sigma > 0.0 {
                            Normal::new(centre, sigma).expect("positive finite width").sample(&mut rng)
                        } else {
                            centre
                        };
                        v.clamp(lo, hi)
                    })
                    .collect()
            })
            .collect();
        let costs: Vec<f64> = candidates.par_iter().map(|x| objective(x)).collect();
        evaluations += costs.len();
        let mean_cost = mean_finite(&costs);
        archive.extend(candidates.into_iter().zip(costs).map(|(x, cost)| Entry { x, cost }));
        sort_archive(&mut archive);
        archive.truncate(config.archive_size);
        curve.push(IterationLog {
            iteration,
            best_cost: archive[0].cost,
            mean_cost,
        });
    }
    Ok(AcoResult {
        best: archive[0].x.clone(),
        best_cost: archive[0].cost,
        curve,
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub gains: ControllerGains,
    pub best_cost: f64,
    pub curve: Vec<IterationLog>,
    pub evaluations: usize,
}

/// Tunes gains and torso pitch against a rollout cost.
pub fn aco_tune<F>(config: &AcoConfig, rollout_fn: F) -> Result<TuneResult>
where
    F: Fn(&ControllerGains) -> RolloutResult + Sync,
{
    let bounds = config.dimension_bounds();
    let result = aco_minimize(config, &bounds, |x| rollout_fn(&config.gains_from(x)).cost())?;
    Ok(TuneResult {
        gains: config.gains_from(&result.best),
        best_cost: result.best_cost,
        curve: result.curve,
        evaluations: result.evaluations,
    })
}

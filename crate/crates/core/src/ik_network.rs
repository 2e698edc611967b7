//! Per-pose unsupervised inverse kinematics: a 2-10-2 network trained on the
//! forward-kinematics residual of a two-link leg, warm-started pose to pose.

use std::time::Instant;

use nalgebra::{SMatrix, SVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait_planner::CartesianGait;
use crate::model::{forward_kinematics_leg, JointVector, Point, RobotModel};

pub const HIDDEN: usize = 10;

const KNEE_GUESS: f64 = 1.2;
const THIGH_LEAD: f64 = 0.6;

type Hidden = SVector<f64, HIDDEN>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkWeights {
    pub w_hidden: SMatrix<f64, HIDDEN, 2>,
    pub b_hidden: Hidden,
    pub w_out: SMatrix<f64, 2, HIDDEN>,
    pub b_out: Vector2<f64>,
}

impl NetworkWeights {
    /// Every weight and bias uniform on `[-0.5, 0.5]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut u = || rng.gen_range(-0.5..=0.5);
        Self {
            w_hidden: SMatrix::from_fn(|_, _| u()),
            b_hidden: Hidden::from_fn(|_, _| u()),
            w_out: SMatrix::from_fn(|_, _| u()),
            b_out: Vector2::from_fn(|_, _| u()),
        }
    }

    pub fn seeded(seed: u64) -> Self {
        Self::random(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn is_finite(&self) -> bool {
        self.w_hidden.iter().all(|v| v.is_finite())
            && self.b_hidden.iter().all(|v| v.is_finite())
            && self.w_out.iter().all(|v| v.is_finite())
            && self.b_out.iter().all(|v| v.is_finite())
    }

    pub fn forward(&self, input: &Vector2<f64>) -> (Hidden, Vector2<f64>) {
        let hidden = (self.w_hidden * input + self.b_hidden).map(sigmoid);
        let out = self.w_out * hidden + self.b_out;
        (hidden, out)
    }

    /// Shifts the output biases so the network answers `angles` for `input`.
    pub fn prime(&mut self, input: &Vector2<f64>, angles: Vector2<f64>) {
        let (_, out) = self.forward(input);
        self.b_out += angles - out;
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IkHyper {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Squared ankle error at which a pose counts as solved, m².
    pub threshold: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for IkHyper {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            max_epochs: 5000,
            threshold: 1e-6,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl IkHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.threshold > 0.0 && self.max_epochs > 0) {
            return Err(Error::InvalidParameter(format!(
                "IK needs learning_rate, threshold, max_epochs > 0 (got {}, {}, {})",
                self.learning_rate, self.threshold, self.max_epochs
            )));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("IK moment decay rates must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSolution {
    pub theta1: f64,
    pub theta2: f64,
    pub epochs: usize,
    /// Final squared ankle error, m².
    pub error: f64,
    /// Number of rejected steps, each of which halved the step size.
    pub halvings: usize,
}

/// Network input for a target: hip-relative and scaled by the leg length.
pub fn network_input(hip: Point, target: Point, l1: f64, l2: f64) -> Vector2<f64> {
    (target - hip) / (l1 + l2)
}

/// Forward-knee starting angles pointing the thigh slightly behind the target.
pub fn knee_forward_guess(hip: Point, target: Point) -> Vector2<f64> {
    let dir = (hip.y - target.y).atan2(target.x - hip.x);
    Vector2::new(dir - THIGH_LEAD, KNEE_GUESS)
}

/// Seeded random weights primed to the forward-knee guess for `target`.
pub fn cold_start(seed: u64, hip: Point, target: Point, l1: f64, l2: f64) -> NetworkWeights {
    let mut w = NetworkWeights::seeded(seed);
    w.prime(&network_input(hip, target, l1, l2), knee_forward_guess(hip, target));
    w
}

struct Moments {
    m: NetworkWeights,
    v: NetworkWeights,
}

impl Moments {
    fn zero() -> Self {
        let z = NetworkWeights {
            w_hidden: SMatrix::zeros(),
            b_hidden: Hidden::zeros(),
            w_out: SMatrix::zeros(),
            b_out: Vector2::zeros(),
        };
        Self { m: z.clone(), v: z }
    }
}

fn residual(out: &Vector2<f64>, hip: Point, target: Point, l1: f64, l2: f64) -> (Vector2<f64>, f64) {
    let e = forward_kinematics_leg(hip, out[0], out[1], l1, l2) - target;
    (e, e.norm_squared())
}

fn gradient(
    w: &NetworkWeights,
    input: &Vector2<f64>,
    hidden: &Hidden,
    out: &Vector2<f64>,
    e: &Vector2<f64>,
    l1: f64,
    l2: f64,
) -> NetworkWeights {
    let (t1, t12) = (out[0], out[0] + out[1]);
    let (s1, c1, s12, c12) = (t1.sin(), t1.cos(), t12.sin(), t12.cos());
    let jac = SMatrix::<f64, 2, 2>::new(
        -l1 * s1 - l2 * s12,
        -l2 * s12,
        -l1 * c1 - l2 * c12,
        -l2 * c12,
    );
    let g_out = 2.0 * jac.transpose() * e;
    let g_hidden = (w.w_out.transpose() * g_out).component_mul(&hidden.map(|h| h * (1.0 - h)));
    NetworkWeights {
        w_hidden: g_hidden * input.transpose(),
        b_hidden: g_hidden,
        w_out: g_out * hidden.transpose(),
        b_out: g_out,
    }
}

fn adam_update<const R: usize, const C: usize>(
    w: &mut SMatrix<f64, R, C>,
    g: &SMatrix<f64, R, C>,
    m: &mut SMatrix<f64, R, C>,
    v: &mut SMatrix<f64, R, C>,
    step: f64,
    hyper: &IkHyper,
    bias: (f64, f64),
) {
    for i in 0..R * C {
        m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
        v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
        let mh = m[i] / bias.0;
        let vh = v[i] / bias.1;
        w[i] -= step * mh / (vh.sqrt() + hyper.epsilon);
    }
}

/// Trains `weights` in place until the ankle error drops below the threshold.
/// A step that raises the error is discarded and halves the step size, so the
/// accepted error never increases.
pub fn train_pose(
    weights: &mut NetworkWeights,
    hip: Point,
    target: Point,
    l1: f64,
    l2: f64,
    hyper: &IkHyper,
) -> Result<PoseSolution> {
    hyper.validate()?;
    let input = network_input(hip, target, l1, l2);
    let (mut hidden, mut out) = weights.forward(&input);
    let (mut e, mut err) = residual(&out, hip, target, l1, l2);
    let mut moments = Moments::zero();
    let mut step = hyper.learning_rate;
    let mut halvings = 0;
    let mut epochs = 0;
    while epochs < hyper.max_epochs && !(err < hyper.threshold) {
        epochs += 1;
        let g = gradient(weights, &input, &hidden, &out, &e, l1, l2);
        let n = epochs as i32;
        let bias = (1.0 - hyper.beta1.powi(n), 1.0 - hyper.beta2.powi(n));
        let mut trial = weights.clone();
        let Moments { m, v } = &mut moments;
        adam_update(&mut trial.w_hidden, &g.w_hidden, &mut m.w_hidden, &mut v.w_hidden, step, hyper, bias);
        adam_update(&mut trial.b_hidden, &g.b_hidden, &mut m.b_hidden, &mut v.b_hidden, step, hyper, bias);
        adam_update(&mut trial.w_out, &g.w_out, &mut m.w_out, &mut v.w_out, step, hyper, bias);
        adam_update(&mut trial.b_out, &g.b_out, &mut m.b_out, &mut v.b_out, step, hyper, bias);
        let (h_new, out_new) = trial.forward(&input);
        let (e_new, err_new) = residual(&out_new, hip, target, l1, l2);
        if !(err_new <= err) {
            step *= 0.5;
            halvings += 1;
            continue;
        }
        *weights = trial;
        (hidden, out, e, err) = (h_new, out_new, e_new, err_new);
    }
    if err < hyper.threshold {
        Ok(PoseSolution {
            theta1: out[0],
            theta2: out[1],
            epochs,
            error: err,
            halvings,
        })
    } else {
        Err(Error::IkNotConverged {
            epochs,
            error: err,
            theta1: out[0],
            theta2: out[1],
        })
    }
}

/// Desired joint trajectory with per-pose solver statistics. Index 0 of each
/// pair is the swing leg, index 1 the stance leg.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointTrajectory {
    pub t: Vec<f64>,
    pub q: Vec<JointVector>,
    pub qdot: Vec<JointVector>,
    pub epochs: Vec<[usize; 2]>,
    pub error: Vec<[f64; 2]>,
    pub halvings: Vec<[usize; 2]>,
    /// Wall-clock solve time per pose, ms. Not reproducible between runs.
    pub solve_ms: Vec<f64>,
}

impl JointTrajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Equality of everything except the timing column.
    pub fn same_solution(&self, other: &Self) -> bool {
        self.t == other.t
            && self.q == other.q
            && self.qdot == other.qdot
            && self.epochs == other.epochs
            && self.error == other.error
            && self.halvings == other.halvings
    }

    /// Trajectory from given joint samples with finite-difference rates.
    pub fn from_samples(t: Vec<f64>, q: Vec<JointVector>, dt: f64) -> Self {
        let n = q.len();
        Self {
            qdot: finite_difference_rates(&q, dt),
            t,
            q,
            epochs: vec![[0, 0]; n],
            error: vec![[0.0, 0.0]; n],
            halvings: vec![[0, 0]; n],
            solve_ms: vec![0.0; n],
        }
    }
}

/// Central differences inside, one-sided differences at both ends.
pub fn finite_difference_rates(q: &[JointVector], dt: f64) -> Vec<JointVector> {
    let n = q.len();
    (0..n)
        .map(|k| match (k, n) {
            (_, 1) => JointVector::zeros(),
            (0, _) => (q[1] - q[0]) / dt,
            (k, n) if k + 1 == n => (q[k] - q[k - 1]) / dt,
            (k, _) => (q[k + 1] - q[k - 1]) / (2.0 * dt),
        })
        .collect()
}

/// Solves both legs at every sample of `gait`, warm-starting each leg's
/// network from its previous pose. The torso holds `torso_pitch`; the swing
/// foot follows the planned sole and toe angles and the stance foot stays flat.
pub fn solve_gait(
    gait: &CartesianGait,
    model: &RobotModel,
    hyper: &IkHyper,
    torso_pitch: f64,
    seed: u64,
) -> Result<JointTrajectory> {
    hyper.validate()?;
    let (l1, l2) = (model.thigh(), model.shank());
    let anchor = gait.stance_anchor();
    let n = gait.len();
    let mut out = JointTrajectory {
        t: gait.t.clone(),
        q: Vec::with_capacity(n),
        qdot: Vec::new(),
        epochs: Vec::with_capacity(n),
        error: Vec::with_capacity(n),
        halvings: Vec::with_capacity(n),
        solve_ms: Vec::with_capacity(n),
    };
    let mut nets: [Option<NetworkWeights>; 2] = [None, None];
    for k in 0..n {
        let hip = gait.hip[k];
        let started = Instant::now();
        let mut legs = [PoseSolution {
            theta1: 0.0,
            theta2: 0.0,
            epochs: 0,
            error: 0.0,
            halvings: 0,
        }; 2];
        for (leg, (target, name)) in [(gait.ankle[k], "swing"), (anchor, "stance")].into_iter().enumerate() {
            let net = nets[leg].get_or_insert_with(|| cold_start(seed.wrapping_add(leg as u64), hip, target, l1, l2));
            legs[leg] = train_pose(net, hip, target, l1, l2, hyper).map_err(|e| Error::IkSample {
                index: k,
                leg: name,
                source: Box::new(e),
            })?;
        }
        out.solve_ms.push(started.elapsed().as_secs_f64() * 1e3);
        let [sw, st] = legs;
        out.q.push(JointVector::from_column_slice(&[
            sw.theta1,
            sw.theta2,
            st.theta1,
            st.theta2,
            torso_pitch,
            gait.theta_sole[k],
            gait.theta_toe[k],
            0.0,
            0.0,
        ]));
        out.epochs.push([sw.epochs, st.epochs]);
        out.error.push([sw.error, st.error]);
        out.halvings.push([sw.halvings, st.halvings]);
    }
    out.qdot = finite_difference_rates(&out.q, gait.params.dt);
    Ok(out)
}

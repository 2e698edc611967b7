//! Geometry, inertia and kinematics of the planar nine-link toe-foot biped.
//!
//! Joint layout (index: meaning):
//!
//! | q   | link | meaning                              |
//! |-----|------|--------------------------------------|
//! | q1  | 1    | swing thigh, absolute                |
//! | q2  | 2    | swing knee, relative to the thigh    |
//! | q3  | 3    | stance thigh, absolute               |
//! | q4  | 4    | stance knee, relative to the thigh   |
//! | q5  | 5    | torso pitch, absolute                |
//! | q6  | 6    | swing sole (ankle to sole), absolute |
//! | q7  | 7    | swing toe (sole to toe), absolute    |
//! | q8  | 8    | stance sole, absolute                |
//! | q9  | 9    | stance toe, absolute                 |
//!
//! Leg and foot segments point along `(cos φ, −sin φ)`: `φ = 0` is forward,
//! `φ = π/2` is straight down. The torso points along `(cos φ, sin φ)`, so an
//! upright torso has `q5 = π/2`. A positive foot angle lifts the heel end of
//! the segment. The stance ankle is the fixed base of the chain.

use nalgebra::{SMatrix, SVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;
pub type JointVector = SVector<f64, 9>;
pub type ContactJacobian = SMatrix<f64, 12, 9>;

pub const N_JOINTS: usize = 9;
pub const N_CONTACTS: usize = 6;

/// Contact point order used by [`contact_points`], [`contact_jacobian`] and
/// the force vectors of the dynamics module.
pub const CONTACT_NAMES: [&str; N_CONTACTS] = [
    "swing_toe",
    "swing_sole",
    "swing_ankle",
    "stance_toe",
    "stance_sole",
    "stance_ankle",
];

pub const STANCE_ANKLE_CONTACT: usize = 5;

pub const DEFAULT_GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    /// Link lengths l1..l9 in meters.
    pub lengths: [f64; 9],
    /// Link masses m1..m9 in kilograms.
    pub masses: [f64; 9],
    /// Moments of inertia about each link COM, kg·m².
    pub inertias: [f64; 9],
    pub gravity: f64,
}

impl Default for RobotModel {
    fn default() -> Self {
        Self::nominal()
    }
}

impl RobotModel {
    /// Nominal robot: 0.8 m legs, 0.3 m torso, 0.17 m toe-feet.
    pub fn nominal() -> Self {
        let lengths = [0.40, 0.40, 0.40, 0.40, 0.30, 0.12, 0.05, 0.12, 0.05];
        let masses = [6.0, 4.0, 6.0, 4.0, 30.0, 0.70, 0.15, 0.70, 0.15];
        Self::with_rod_inertias(lengths, masses, DEFAULT_GRAVITY)
    }

    /// Inertias of uniform slender rods, `m l² / 12`.
    pub fn with_rod_inertias(lengths: [f64; 9], masses: [f64; 9], gravity: f64) -> Self {
        let mut inertias = [0.0; 9];
        for i in 0..9 {
            inertias[i] = masses[i] * lengths[i] * lengths[i] / 12.0;
        }
        Self {
            lengths,
            masses,
            inertias,
            gravity,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn thigh(&self) -> f64 {
        self.lengths[0]
    }

    pub fn shank(&self) -> f64 {
        self.lengths[1]
    }

    pub fn leg_length(&self) -> f64 {
        self.lengths[0] + self.lengths[1]
    }

    pub fn sole(&self) -> f64 {
        self.lengths[5]
    }

    pub fn toe(&self) -> f64 {
        self.lengths[6]
    }

    pub fn foot_length(&self) -> f64 {
        self.lengths[5] + self.lengths[6]
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..9 {
            let (l, m, inertia) = (self.lengths[i], self.masses[i], self.inertias[i]);
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidParameter(format!("l{} = {l} must be > 0", i + 1)));
            }
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::InvalidParameter(format!("m{} = {m} must be > 0", i + 1)));
            }
            if !(inertia.is_finite() && inertia >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "I{} = {inertia} must be >= 0",
                    i + 1
                )));
            }
        }
        let l = &self.lengths;
        let pairs = [(0, 2), (1, 3), (5, 7), (6, 8)];
        for (a, b) in pairs {
            if (l[a] - l[b]).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "legs must be symmetric: l{} = {} but l{} = {}",
                    a + 1,
                    l[a],
                    b + 1,
                    l[b]
                )));
            }
        }
        if !(self.gravity.is_finite() && self.gravity > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gravity = {} must be > 0",
                self.gravity
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    pub q: JointVector,
    pub qdot: JointVector,
}

impl JointState {
    pub fn new(q: JointVector, qdot: JointVector) -> Self {
        Self { q, qdot }
    }

    pub fn at_rest(q: JointVector) -> Self {
        Self {
            q,
            qdot: JointVector::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|v| v.is_finite())
    }

    /// Knees may flex forward but not hyperextend past the straight leg.
    pub fn knees_respect_hinge(&self) -> bool {
        self.q[1] >= 0.0 && self.q[3] >= 0.0
    }
}

/// Position, velocity and acceleration of one link's center of mass.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinkComState {
    pub position: Point,
    pub velocity: Point,
    pub acceleration: Point,
}

/// Ankle position of a two-link leg hanging from `hip`.
pub fn forward_kinematics_leg(hip: Point, theta1: f64, theta2: f64, l1: f64, l2: f64) -> Point {
    let shank = theta1 + theta2;
    Point::new(
        hip.x + l1 * theta1.cos() + l2 * shank.cos(),
        hip.y - (l1 * theta1.sin() + l2 * shank.sin()),
    )
}

/// Closed-form two-link inverse kinematics on the forward-knee branch
/// (`theta2 >= 0`). Returns `None` when the target is out of reach.
pub fn two_link_ik(hip: Point, ankle: Point, l1: f64, l2: f64) -> Option<(f64, f64)> {
    let dx = ankle.x - hip.x;
    let dz = hip.y - ankle.y;
    let d2 = dx * dx + dz * dz;
    let c2 = (d2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if !(-1.0..=1.0).contains(&c2) {
        return None;
    }
    let theta2 = c2.acos();
    let theta1 = dz.atan2(dx) - (l2 * theta2.sin()).atan2(l1 + l2 * theta2.cos());
    Some((theta1, theta2))
}

/// Sole and toe positions of a foot whose ankle is at `ankle`.
pub fn foot_points(ankle: Point, theta_sole: f64, theta_toe: f64, l6: f64, l7: f64) -> (Point, Point) {
    let sole = ankle + l6 * segment_dir(theta_sole);
    let toe = sole + l7 * segment_dir(theta_toe);
    (sole, toe)
}

#[inline]
pub(crate) fn segment_dir(phi: f64) -> Point {
    Point::new(phi.cos(), -phi.sin())
}

/// Absolute orientation of every link from the generalized coordinates.
#[inline]
pub fn link_angles(q: &JointVector) -> [f64; 9] {
    [
        q[0],
        q[0] + q[1],
        q[2],
        q[2] + q[3],
        q[4],
        q[5],
        q[6],
        q[7],
        q[8],
    ]
}

/// `phi_dot = LINK_RATE_MAP * q_dot`, as (link, joint) nonzero entries.
const LINK_RATE_ENTRIES: [(usize, usize); 11] = [
    (0, 0),
    (1, 0),
    (1, 1),
    (2, 2),
    (3, 2),
    (3, 3),
    (4, 4),
    (5, 5),
    (6, 6),
    (7, 7),
    (8, 8),
];

/// Every tracked point is `anchor + Σ_j c_j · dir_j(φ_j)`.
type Coeffs = [f64; 9];

/// Precomputed point coefficients and inertial data for a model.
#[derive(Debug, Clone)]
pub struct Chain {
    com: [Coeffs; 9],
    contacts: [Coeffs; N_CONTACTS],
    hip: Coeffs,
    swing_ankle: Coeffs,
    pub masses: [f64; 9],
    pub inertias: [f64; 9],
    pub gravity: f64,
}

/// Per-configuration trigonometry shared by all point evaluations.
#[derive(Debug, Clone, Copy)]
pub struct Pose {
    dir: [Point; 9],
    ddir: [Point; 9],
}

impl Pose {
    pub fn new(q: &JointVector) -> Self {
        let phi = link_angles(q);
        let mut dir = [Point::zeros(); 9];
        let mut ddir = [Point::zeros(); 9];
        for j in 0..9 {
            let (s, c) = phi[j].sin_cos();
            if j == 4 {
                dir[j] = Point::new(c, s);
                ddir[j] = Point::new(-s, c);
            } else {
                dir[j] = Point::new(c, -s);
                ddir[j] = Point::new(-s, -c);
            }
        }
        Self { dir, ddir }
    }
}

impl Chain {
    pub fn new(model: &RobotModel) -> Self {
        let l = model.lengths;
        let mut knee_st = [0.0; 9];
        knee_st[3] = -l[3];
        let mut hip = knee_st;
        hip[2] = -l[2];
        let mut knee_sw = hip;
        knee_sw[0] = l[0];
        let mut ankle_sw = knee_sw;
        ankle_sw[1] = l[1];
        let mut sole_sw = ankle_sw;
        sole_sw[5] = l[5];
        let mut toe_sw = sole_sw;
        toe_sw[6] = l[6];
        let mut torso_top = hip;
        torso_top[4] = l[4];
        let ankle_st = [0.0; 9];
        let mut sole_st = ankle_st;
        sole_st[7] = l[7];
        let mut toe_st = sole_st;
        toe_st[8] = l[8];

        let mid = |a: &Coeffs, b: &Coeffs| {
            let mut m = [0.0; 9];
            for j in 0..9 {
                m[j] = 0.5 * (a[j] + b[j]);
            }
            m
        };
        let com = [
            mid(&hip, &knee_sw),
            mid(&knee_sw, &ankle_sw),
            mid(&hip, &knee_st),
            mid(&knee_st, &ankle_st),
            mid(&hip, &torso_top),
            mid(&ankle_sw, &sole_sw),
            mid(&sole_sw, &toe_sw),
            mid(&ankle_st, &sole_st),
            mid(&sole_st, &toe_st),
        ];
        Self {
            com,
            contacts: [toe_sw, sole_sw, ankle_sw, toe_st, sole_st, ankle_st],
            hip,
            swing_ankle: ankle_sw,
            masses: model.masses,
            inertias: model.inertias,
            gravity: model.gravity,
        }
    }

    #[inline]
    fn position(c: &Coeffs, pose: &Pose, anchor: Point) -> Point {
        let mut p = anchor;
        for j in 0..9 {
            if c[j] != 0.0 {
                p += c[j] * pose.dir[j];
            }
        }
        p
    }

    /// 2×9 Jacobian of a point with respect to q, as two rows.
    #[inline]
    fn jacobian(c: &Coeffs, pose: &Pose) -> [[f64; 9]; 2] {
        let mut dphi = [Point::zeros(); 9];
        for j in 0..9 {
            dphi[j] = c[j] * pose.ddir[j];
        }
        let mut jac = [[0.0; 9]; 2];
        for &(link, joint) in LINK_RATE_ENTRIES.iter() {
            jac[0][joint] += dphi[link].x;
            jac[1][joint] += dphi[link].y;
        }
        jac
    }

    /// Velocity-product acceleration `J̇ q̇` of a point.
    #[inline]
    fn bias_acceleration(c: &Coeffs, pose: &Pose, phi_dot: &[f64; 9]) -> Point {
        let mut a = Point::zeros();
        for j in 0..9 {
            if c[j] != 0.0 {
                // d²dir/dφ² = −dir for both direction conventions
                a -= c[j] * phi_dot[j] * phi_dot[j] * pose.dir[j];
            }
        }
        a
    }

    pub fn hip(&self, pose: &Pose, anchor: Point) -> Point {
        Self::position(&self.hip, pose, anchor)
    }

    pub fn swing_ankle(&self, pose: &Pose, anchor: Point) -> Point {
        Self::position(&self.swing_ankle, pose, anchor)
    }

    pub fn com_positions(&self, pose: &Pose, anchor: Point) -> [Point; 9] {
        std::array::from_fn(|i| Self::position(&self.com[i], pose, anchor))
    }

    pub fn contact_positions(&self, pose: &Pose, anchor: Point) -> [Point; N_CONTACTS] {
        std::array::from_fn(|i| Self::position(&self.contacts[i], pose, anchor))
    }

    pub fn com_jacobians(&self, pose: &Pose) -> [[[f64; 9]; 2]; 9] {
        std::array::from_fn(|i| Self::jacobian(&self.com[i], pose))
    }

    pub fn contact_jacobian(&self, pose: &Pose) -> ContactJacobian {
        let mut jac = ContactJacobian::zeros();
        for (k, c) in self.contacts.iter().enumerate() {
            let rows = Self::jacobian(c, pose);
            for j in 0..9 {
                jac[(2 * k, j)] = rows[0][j];
                jac[(2 * k + 1, j)] = rows[1][j];
            }
        }
        jac
    }

    pub fn com_bias_accelerations(&self, pose: &Pose, qdot: &JointVector) -> [Point; 9] {
        let phi_dot = link_angles(qdot);
        std::array::from_fn(|i| Self::bias_acceleration(&self.com[i], pose, &phi_dot))
    }

    pub fn contact_bias_accelerations(&self, pose: &Pose, qdot: &JointVector) -> [Point; N_CONTACTS] {
        let phi_dot = link_angles(qdot);
        std::array::from_fn(|i| Self::bias_acceleration(&self.contacts[i], pose, &phi_dot))
    }
}

/// COM position, velocity and acceleration of every link, by exact
/// differentiation of the chain kinematics.
pub fn link_com_states(
    state: &JointState,
    qddot: &JointVector,
    model: &RobotModel,
    stance_anchor: Point,
) -> [LinkComState; 9] {
    let chain = Chain::new(model);
    link_com_states_with(&chain, state, qddot, stance_anchor)
}

pub fn link_com_states_with(
    chain: &Chain,
    state: &JointState,
    qddot: &JointVector,
    stance_anchor: Point,
) -> [LinkComState; 9] {
    let pose = Pose::new(&state.q);
    let positions = chain.com_positions(&pose, stance_anchor);
    let jacs = chain.com_jacobians(&pose);
    let bias = chain.com_bias_accelerations(&pose, &state.qdot);
    std::array::from_fn(|i| {
        let mut v = Point::zeros();
        let mut a = bias[i];
        for j in 0..9 {
            v.x += jacs[i][0][j] * state.qdot[j];
            v.y += jacs[i][1][j] * state.qdot[j];
            a.x += jacs[i][0][j] * qddot[j];
            a.y += jacs[i][1][j] * qddot[j];
        }
        LinkComState {
            position: positions[i],
            velocity: v,
            acceleration: a,
        }
    })
}

/// Positions of the six contact points in [`CONTACT_NAMES`] order.
pub fn contact_points(q: &JointVector, model: &RobotModel, stance_anchor: Point) -> [Point; N_CONTACTS] {
    Chain::new(model).contact_positions(&Pose::new(q), stance_anchor)
}

/// 12×9 map from joint rates to contact-point velocities, rows `(x, z)` per
/// contact point in [`CONTACT_NAMES`] order.
pub fn contact_jacobian(state: &JointState, model: &RobotModel) -> ContactJacobian {
    Chain::new(model).contact_jacobian(&Pose::new(&state.q))
}

/// Hip position implied by the stance leg.
pub fn hip_position(q: &JointVector, model: &RobotModel, stance_anchor: Point) -> Point {
    Chain::new(model).hip(&Pose::new(q), stance_anchor)
}

//! Lagrangian dynamics of the nine-link chain, spring-damper ground contact,
//! and fixed-step forward integration.

use nalgebra::{Cholesky, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait_planner::{Staircase, SurfaceContact};
use crate::model::{Chain, JointVector, Point, Pose, RobotModel, N_CONTACTS, N_JOINTS};

pub type MassMatrix = SMatrix<f64, N_JOINTS, N_JOINTS>;
pub type ContactForceVector = SVector<f64, { 2 * N_CONTACTS }>;

/// Largest joint rate before a state counts as blown up, rad/s.
pub const MAX_JOINT_RATE: f64 = 100.0;
/// Largest accepted mass-matrix condition estimate.
pub const MAX_CONDITION: f64 = 1e12;
/// Internal substeps per external step.
pub const DEFAULT_SUBSTEPS: usize = 10;

const CHRISTOFFEL_STEP: f64 = 1e-6;

/// Rotational rate of each link as a row over the joint rates.
const LINK_RATES: [[f64; N_JOINTS]; 9] = {
    let mut rows = [[0.0; N_JOINTS]; 9];
    rows[0][0] = 1.0;
    rows[1][0] = 1.0;
    rows[1][1] = 1.0;
    rows[2][2] = 1.0;
    rows[3][2] = 1.0;
    rows[3][3] = 1.0;
    rows[4][4] = 1.0;
    rows[5][5] = 1.0;
    rows[6][6] = 1.0;
    rows[7][7] = 1.0;
    rows[8][8] = 1.0;
    rows
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsTerms {
    pub mass: MassMatrix,
    pub coriolis: JointVector,
    pub gravity: JointVector,
}

fn mass_from(chain: &Chain, pose: &Pose) -> MassMatrix {
    let jacs = chain.com_jacobians(pose);
    let mut m = MassMatrix::zeros();
    for (i, jac) in jacs.iter().enumerate() {
        let mi = chain.masses[i];
        let ii = chain.inertias[i];
        for a in 0..N_JOINTS {
            for b in a..N_JOINTS {
                let v = mi * (jac[0][a] * jac[0][b] + jac[1][a] * jac[1][b])
                    + ii * LINK_RATES[i][a] * LINK_RATES[i][b];
                if v != 0.0 {
                    m[(a, b)] += v;
                }
            }
        }
    }
    for a in 0..N_JOINTS {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
    m
}

fn gravity_from(chain: &Chain, pose: &Pose) -> JointVector {
    let jacs = chain.com_jacobians(pose);
    let mut g = JointVector::zeros();
    for (i, jac) in jacs.iter().enumerate() {
        let w = chain.masses[i] * chain.gravity;
        for a in 0..N_JOINTS {
            g[a] += w * jac[1][a];
        }
    }
    g
}

/// `Σ m_i J_iᵀ J̇_i q̇`; link rotation rates are linear in q̇ with constant
/// coefficients, so the rotational part adds nothing.
fn coriolis_from(chain: &Chain, pose: &Pose, qdot: &JointVector) -> JointVector {
    let jacs = chain.com_jacobians(pose);
    let bias = chain.com_bias_accelerations(pose, qdot);
    let mut c = JointVector::zeros();
    for (i, jac) in jacs.iter().enumerate() {
        let b = chain.masses[i] * bias[i];
        for a in 0..N_JOINTS {
            c[a] += jac[0][a] * b.x + jac[1][a] * b.y;
        }
    }
    c
}

/// Joint-space inertia matrix from the per-link COM Jacobians.
pub fn mass_matrix(q: &JointVector, model: &RobotModel) -> MassMatrix {
    mass_from(&Chain::new(model), &Pose::new(q))
}

/// `∂P/∂q` with `P = Σ m_i g z_i`.
pub fn gravity_vector(q: &JointVector, model: &RobotModel) -> JointVector {
    gravity_from(&Chain::new(model), &Pose::new(q))
}

/// Coriolis and centrifugal vector in closed form.
pub fn coriolis_analytic(q: &JointVector, qdot: &JointVector, model: &RobotModel) -> JointVector {
    coriolis_from(&Chain::new(model), &Pose::new(q), qdot)
}

/// `∂M/∂q_k` for every k by central differences.
fn mass_derivatives(chain: &Chain, q: &JointVector) -> [MassMatrix; N_JOINTS] {
    std::array::from_fn(|k| {
        let mut qp = *q;
        let mut qm = *q;
        qp[k] += CHRISTOFFEL_STEP;
        qm[k] -= CHRISTOFFEL_STEP;
        (mass_from(chain, &Pose::new(&qp)) - mass_from(chain, &Pose::new(&qm))) / (2.0 * CHRISTOFFEL_STEP)
    })
}

/// Christoffel-form matrix with `C(q, q̇) = C_mat q̇`, where
/// `C_mat[k][j] = Σ_i Γ_kij q̇_i` and `Γ_kij = ½ (∂M_kj/∂q_i + ∂M_ki/∂q_j − ∂M_ij/∂q_k)`.
pub fn coriolis_matrix(q: &JointVector, qdot: &JointVector, model: &RobotModel) -> MassMatrix {
    let dm = mass_derivatives(&Chain::new(model), q);
    let mut c = MassMatrix::zeros();
    for k in 0..N_JOINTS {
        for j in 0..N_JOINTS {
            let mut s = 0.0;
            for i in 0..N_JOINTS {
                s += 0.5 * (dm[i][(k, j)] + dm[j][(k, i)] - dm[k][(i, j)]) * qdot[i];
            }
            c[(k, j)] = s;
        }
    }
    c
}

/// Coriolis vector from finite-difference Christoffel symbols.
pub fn coriolis_vector(q: &JointVector, qdot: &JointVector, model: &RobotModel) -> JointVector {
    if qdot.iter().all(|v| *v == 0.0) {
        return JointVector::zeros();
    }
    coriolis_matrix(q, qdot, model) * qdot
}

pub fn dynamics_terms(q: &JointVector, qdot: &JointVector, model: &RobotModel) -> DynamicsTerms {
    let chain = Chain::new(model);
    let pose = Pose::new(q);
    DynamicsTerms {
        mass: mass_from(&chain, &pose),
        coriolis: coriolis_from(&chain, &pose, qdot),
        gravity: gravity_from(&chain, &pose),
    }
}

pub fn kinetic_energy(q: &JointVector, qdot: &JointVector, model: &RobotModel) -> f64 {
    0.5 * qdot.dot(&(mass_matrix(q, model) * qdot))
}

pub fn potential_energy(q: &JointVector, model: &RobotModel, anchor: Point) -> f64 {
    let chain = Chain::new(model);
    chain
        .com_positions(&Pose::new(q), anchor)
        .iter()
        .zip(chain.masses)
        .map(|(p, m)| m * chain.gravity * p.y)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactParams {
    /// Spring constant, N/m.
    pub k_s: f64,
    /// Damping constant, N·s/m.
    pub k_d: f64,
    pub mu: f64,
    /// Tangential speed scale of the smoothed friction, m/s.
    pub epsilon: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            k_s: 1e5,
            k_d: 1e3,
            mu: 0.8,
            epsilon: 1e-3,
        }
    }
}

impl ContactParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_s > 0.0 && self.k_d >= 0.0 && self.mu >= 0.0 && self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "contact needs k_s > 0, k_d >= 0, mu >= 0, epsilon > 0 (got {}, {}, {}, {})",
                self.k_s, self.k_d, self.mu, self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub q: JointVector,
    pub qdot: JointVector,
    pub t: f64,
    pub qddot: JointVector,
}

impl SimState {
    pub fn at_rest(q: JointVector) -> Self {
        Self::new(q, JointVector::zeros(), 0.0)
    }

    pub fn new(q: JointVector, qdot: JointVector, t: f64) -> Self {
        Self {
            q,
            qdot,
            t,
            qddot: JointVector::zeros(),
        }
    }

    pub fn max_rate(&self) -> f64 {
        self.qdot.amax()
    }

    fn check(&self) -> Result<()> {
        let finite = self.q.iter().chain(self.qdot.iter()).all(|v| v.is_finite());
        let rate = self.max_rate();
        if !finite || rate > MAX_JOINT_RATE {
            return Err(Error::BlowUp {
                t: self.t,
                max_rate: if finite { rate } else { f64::INFINITY },
            });
        }
        Ok(())
    }
}

/// Contact forces in `(x, z)` pairs per contact point and their joint torques.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactForces {
    pub force: ContactForceVector,
    pub torque: JointVector,
    /// Normal force magnitude per contact point, N.
    pub normals: [f64; N_CONTACTS],
    /// Whether each contact presses on a tread rather than a riser.
    pub tread: [bool; N_CONTACTS],
}

impl ContactForces {
    fn zero() -> Self {
        Self {
            force: ContactForceVector::zeros(),
            torque: JointVector::zeros(),
            normals: [0.0; N_CONTACTS],
            tread: [false; N_CONTACTS],
        }
    }

    fn set(&mut self, k: usize, normal: f64, friction: f64, surface: &SurfaceContact) {
        let f = surface.normal * normal + tangent(surface.normal) * friction;
        self.force[2 * k] = f.x;
        self.force[2 * k + 1] = f.y;
        self.normals[k] = normal;
        self.tread[k] = surface.is_tread();
    }

    pub fn normal(&self, contact: usize) -> f64 {
        self.normals[contact]
    }

    /// Normal force a tread exerts on the point; riser pushes bear no weight.
    pub fn support(&self, contact: usize) -> f64 {
        if self.tread[contact] {
            self.normals[contact]
        } else {
            0.0
        }
    }
}

/// Joint-space spring-damper toward a target, integrated implicitly:
/// `τ = K_p (q_des − q) + K_d (q̇_des − q̇)` at the end of every substep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointDrive {
    pub k_p: JointVector,
    pub k_d: JointVector,
    pub q_des: JointVector,
    pub qdot_des: JointVector,
}

impl JointDrive {
    pub fn torque(&self, q: &JointVector, qdot: &JointVector) -> JointVector {
        self.k_p.component_mul(&(self.q_des - q)) + self.k_d.component_mul(&(self.qdot_des - qdot))
    }
}

/// Everything the integrator needs besides the state.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub chain: Chain,
    pub contact: ContactParams,
    pub ground: Staircase,
    pub anchor: Point,
    pub substeps: usize,
    pub contacts_enabled: bool,
}

/// Per-contact quantities at one configuration.
struct ContactKinematics {
    position: [Point; N_CONTACTS],
    velocity: [Point; N_CONTACTS],
    jacobian: SMatrix<f64, { 2 * N_CONTACTS }, N_JOINTS>,
}

impl Simulator {
    pub fn new(model: &RobotModel, contact: ContactParams, ground: Staircase, anchor: Point) -> Self {
        Self {
            chain: Chain::new(model),
            contact,
            ground,
            anchor,
            substeps: DEFAULT_SUBSTEPS,
            contacts_enabled: true,
        }
    }

    /// No ground at all: the chain swings freely about its anchor.
    pub fn free(model: &RobotModel) -> Self {
        let mut sim = Self::new(model, ContactParams::default(), Staircase::flat(f64::NEG_INFINITY), Point::zeros());
        sim.contacts_enabled = false;
        sim
    }

    fn kinematics(&self, pose: &Pose, qdot: &JointVector) -> ContactKinematics {
        let jacobian = self.chain.contact_jacobian(pose);
        let v = jacobian * qdot;
        ContactKinematics {
            position: self.chain.contact_positions(pose, self.anchor),
            velocity: std::array::from_fn(|k| Point::new(v[2 * k], v[2 * k + 1])),
            jacobian,
        }
    }

    pub fn contact_forces(&self, state: &SimState) -> ContactForces {
        let pose = Pose::new(&state.q);
        let kin = self.kinematics(&pose, &state.qdot);
        self.forces_from(&kin)
    }

    fn surfaces(&self, kin: &ContactKinematics) -> [Option<SurfaceContact>; N_CONTACTS] {
        std::array::from_fn(|k| {
            if self.contacts_enabled {
                self.ground.contact(kin.position[k])
            } else {
                None
            }
        })
    }

    fn forces_from(&self, kin: &ContactKinematics) -> ContactForces {
        let p = &self.contact;
        let mut out = ContactForces::zero();
        for (k, surface) in self.surfaces(kin).iter().enumerate() {
            let Some(s) = surface else { continue };
            let (n, t) = (s.normal, tangent(s.normal));
            let v = kin.velocity[k];
            let normal = (p.k_s * s.depth - p.k_d * n.dot(&v)).max(0.0);
            let friction = -p.mu * normal * (t.dot(&v) / p.epsilon).tanh();
            out.set(k, normal, friction, s);
        }
        out.torque = kin.jacobian.transpose() * out.force;
        out
    }

    /// `q̈ = M⁻¹ (τ + B − C − G)` with the contact forces of `state`.
    pub fn acceleration(&self, state: &SimState, tau: &JointVector) -> Result<(JointVector, ContactForces)> {
        let pose = Pose::new(&state.q);
        let m = mass_from(&self.chain, &pose);
        let rhs_free = tau - coriolis_from(&self.chain, &pose, &state.qdot) - gravity_from(&self.chain, &pose);
        let forces = self.forces_from(&self.kinematics(&pose, &state.qdot));
        let chol = checked_cholesky(m)?;
        Ok((chol.solve(&(rhs_free + forces.torque)), forces))
    }

    /// One external step of the quantized Lagrange update, split into
    /// `substeps` pieces with `tau` held:
    /// `q̇ ← q̇ + q̈ h`, `q ← q + q̇ h + ½ q̈ h²`.
    pub fn tqld_step(&self, state: &SimState, tau: &JointVector, dt: f64) -> Result<SimState> {
        let h = substep(dt, self.substeps)?;
        let mut s = *state;
        for _ in 0..self.substeps {
            let (qddot, _) = self.acceleration(&s, tau)?;
            s.q += s.qdot * h + 0.5 * h * h * qddot;
            s.qdot += qddot * h;
            s.qddot = qddot;
            s.t += h;
            s.check()?;
        }
        s.t = state.t + dt;
        Ok(s)
    }

    /// One external step of semi-implicit Euler with linearly implicit
    /// contact: spring, damper and friction slopes enter the velocity solve,
    /// then `q ← q + q̇⁺ h`. Returns the new state and the last substep's
    /// contact forces evaluated at the new velocity.
    pub fn step(&self, state: &SimState, tau: &JointVector, dt: f64) -> Result<(SimState, ContactForces)> {
        self.step_driven(state, tau, None, dt)
    }

    /// [`Simulator::step`] with an optional joint drive added to `tau` and
    /// treated implicitly alongside the contacts.
    pub fn step_driven(
        &self,
        state: &SimState,
        tau: &JointVector,
        drive: Option<&JointDrive>,
        dt: f64,
    ) -> Result<(SimState, ContactForces)> {
        let h = substep(dt, self.substeps)?;
        let mut s = *state;
        let mut last = ContactForces::zero();
        for _ in 0..self.substeps {
            let pose = Pose::new(&s.q);
            let mut m = mass_from(&self.chain, &pose);
            let mut free = tau - coriolis_from(&self.chain, &pose, &s.qdot) - gravity_from(&self.chain, &pose);
            if let Some(d) = drive {
                // τ⁺ = K_p (q_des − q − h q̇⁺) + K_d (q̇_des − q̇⁺) with D = h K_p + K_d:
                // (M + h D) q̇⁺ = (M + h D) q̇ + h (f + K_p (q_des − q) + K_d q̇_des − D q̇)
                for j in 0..N_JOINTS {
                    let damping = h * d.k_p[j] + d.k_d[j];
                    m[(j, j)] += h * damping;
                    free[j] += d.k_p[j] * (d.q_des[j] - s.q[j]) + d.k_d[j] * d.qdot_des[j] - damping * s.qdot[j];
                }
            }
            let kin = self.kinematics(&pose, &s.qdot);
            let (qdot_new, forces) = self.implicit_velocity(&m, &free, &s.qdot, &kin, h)?;
            let qddot = (qdot_new - s.qdot) / h;
            s.qdot = qdot_new;
            s.q += qdot_new * h;
            s.qddot = qddot;
            s.t += h;
            s.check()?;
            last = forces;
        }
        s.t = state.t + dt;
        Ok((s, last))
    }

    fn implicit_velocity(
        &self,
        m: &MassMatrix,
        free: &JointVector,
        qdot: &JointVector,
        kin: &ContactKinematics,
        h: f64,
    ) -> Result<(JointVector, ContactForces)> {
        let p = &self.contact;
        let surfaces = self.surfaces(kin);
        let mut active: [bool; N_CONTACTS] = std::array::from_fn(|k| surfaces[k].is_some());
        let row = |k: usize, d: Point| kin.jacobian.row(2 * k) * d.x + kin.jacobian.row(2 * k + 1) * d.y;
        // a contact whose implicit normal force would pull is released and the solve repeated
        for _ in 0..=N_CONTACTS {
            let mut lhs = *m;
            let mut rhs = m * qdot + h * free;
            let stiff = p.k_s * h + p.k_d;
            for k in 0..N_CONTACTS {
                let (true, Some(s)) = (active[k], surfaces[k]) else { continue };
                let (n, t) = (s.normal, tangent(s.normal));
                let jn = row(k, n);
                let jt = row(k, t);
                // F_n⁺ = k_s (depth − h v_n⁺) − k_d v_n⁺
                lhs += h * stiff * jn.transpose() * jn;
                rhs += h * p.k_s * s.depth * jn.transpose();
                // friction linearized about the current slip speed with the explicit normal force
                let v = kin.velocity[k];
                let fn0 = (p.k_s * s.depth - p.k_d * n.dot(&v)).max(0.0);
                let slip = t.dot(&v);
                let th = (slip / p.epsilon).tanh();
                let slope = p.mu * fn0 * (1.0 - th * th) / p.epsilon;
                let f0 = -p.mu * fn0 * th + slope * slip;
                lhs += h * slope * jt.transpose() * jt;
                rhs += h * f0 * jt.transpose();
            }
            let qdot_new = checked_cholesky(lhs)?.solve(&rhs);
            let v_new = kin.jacobian * qdot_new;
            let mut released = false;
            let mut out = ContactForces::zero();
            for k in 0..N_CONTACTS {
                let (true, Some(s)) = (active[k], surfaces[k]) else { continue };
                let v = Point::new(v_new[2 * k], v_new[2 * k + 1]);
                let normal = p.k_s * s.depth - stiff * s.normal.dot(&v);
                if normal < 0.0 {
                    active[k] = false;
                    released = true;
                    continue;
                }
                let friction = -p.mu * normal * (tangent(s.normal).dot(&v) / p.epsilon).tanh();
                out.set(k, normal, friction, &s);
            }
            if !released {
                out.torque = kin.jacobian.transpose() * out.force;
                return Ok((qdot_new, out));
            }
        }
        unreachable!("each repeat releases at least one of finitely many contacts")
    }
}

/// Tangent direction of a face, a quarter turn clockwise from its normal.
fn tangent(normal: Point) -> Point {
    Point::new(normal.y, -normal.x)
}

fn substep(dt: f64, substeps: usize) -> Result<f64> {
    if !(dt > 0.0 && dt.is_finite() && substeps > 0) {
        return Err(Error::InvalidParameter(format!(
            "step needs dt > 0 and at least one substep (dt = {dt}, substeps = {substeps})"
        )));
    }
    Ok(dt / substeps as f64)
}

/// Cholesky factor, rejecting matrices whose condition estimate from the
/// factor's diagonal exceeds [`MAX_CONDITION`].
fn checked_cholesky(m: MassMatrix) -> Result<Cholesky<f64, nalgebra::Const<N_JOINTS>>> {
    let chol = Cholesky::new(m).ok_or(Error::SingularMassMatrix(f64::INFINITY))?;
    let d = chol.l_dirty().diagonal();
    let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let cond = (hi / lo).powi(2);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::SingularMassMatrix(cond));
    }
    Ok(chol)
}

/// Contact forces of one state, as a free function.
pub fn contact_forces(
    state: &SimState,
    model: &RobotModel,
    params: &ContactParams,
    ground: &Staircase,
    anchor: Point,
) -> ContactForces {
    Simulator::new(model, *params, ground.clone(), anchor).contact_forces(state)
}

/// One quantized Lagrange step with the default substep count.
pub fn tqld_step(
    state: &SimState,
    tau: &JointVector,
    dt: f64,
    model: &RobotModel,
    params: &ContactParams,
    ground: &Staircase,
    anchor: Point,
) -> Result<SimState> {
    Simulator::new(model, *params, ground.clone(), anchor).tqld_step(state, tau, dt)
}

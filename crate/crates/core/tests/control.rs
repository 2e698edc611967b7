use proptest::prelude::*;
use stairclimb::control::*;
use stairclimb::dynamics::{ContactParams, SimState, Simulator};
use stairclimb::gait_planner::{
    assemble_gait, knot_shift_optimize, CartesianGait, GaitParams, KnotBounds, StairSpec, StepKind,
};
use stairclimb::ik_network::{solve_gait, IkHyper};
use stairclimb::model::{JointVector, RobotModel, N_JOINTS};
use stairclimb::Error;

fn case_one() -> (RobotModel, CartesianGait, Reference) {
    let model = RobotModel::nominal();
    let stairs = StairSpec {
        run: 0.2794,
        rise: 0.64 * 0.2794,
        n_steps: 1,
    };
    let kind = StepKind::Subsequent;
    let shifted = knot_shift_optimize(&stairs, &model, kind, &KnotBounds::default(), &GaitParams::default(), 11).unwrap();
    let gait = assemble_gait(&stairs, &model, &shifted.params, kind).unwrap();
    let traj = solve_gait(&gait, &model, &IkHyper::default(), 1.25, 7).unwrap();
    let reference = Reference::from_gait(&traj, &gait);
    (model, gait, reference)
}

fn still_reference(q: JointVector, n: usize, dt: f64) -> Reference {
    Reference {
        dt,
        t: (0..n).map(|k| k as f64 * dt).collect(),
        q: vec![q; n],
        qdot: vec![JointVector::zeros(); n],
        ssp: vec![true; n],
        k_slope: 0.0,
    }
}

fn weightless_plant() -> Plant {
    let model = RobotModel {
        gravity: 0.0,
        ..RobotModel::nominal()
    };
    Plant {
        sim: Simulator::free(&model),
        model,
    }
}

#[test]
fn pd_torque_examples() {
    let g = ControllerGains::shared(23.3027, 5.0, 1.25);
    let z = JointVector::zeros();
    assert_eq!(pd_torque(&g, &z, &z, &z, &z), z);
    let mut q_des = z;
    q_des[0] = 0.1;
    let tau = pd_torque(&g, &q_des, &z, &z, &z);
    assert!((tau[0] - 2.33027).abs() <= 1e-12);
    assert!(tau.rows(1, N_JOINTS - 1).iter().all(|t| *t == 0.0));
    let mut qdot = z;
    qdot[3] = 2.0;
    assert!((pd_torque(&g, &z, &z, &z, &qdot)[3] + 10.0).abs() <= 1e-15);
}

#[test]
fn pd_torque_is_linear_in_the_error() {
    let g = ControllerGains::shared(40.0, 7.0, 1.2);
    let e = JointVector::from_fn(|j, _| 0.01 * (j as f64 + 1.0));
    let ed = JointVector::from_fn(|j, _| -0.03 * j as f64);
    let z = JointVector::zeros();
    let one = pd_torque(&g, &e, &z, &ed, &z);
    let three = pd_torque(&g, &(3.0 * e), &z, &(3.0 * ed), &z);
    assert!((three - 3.0 * one).amax() <= 1e-12);
    let shifted = pd_torque(&g, &(e + e), &e, &(ed + ed), &ed);
    assert!((shifted - one).amax() <= 1e-12);
}

#[test]
fn disturbance_torque_values() {
    assert_eq!(disturbance_torque(0.0), 0.0);
    assert!((disturbance_torque(std::f64::consts::FRAC_PI_4) - 1.0 / 70.0).abs() <= 1e-15);
}

#[test]
fn gains_validation() {
    assert!(ControllerGains::shared(10.0, 1.0, 1.2).validate().is_ok());
    assert!(ControllerGains::shared(-1.0, 1.0, 1.2).validate().is_err());
    assert!(ControllerGains::shared(1.0, f64::NAN, 1.2).validate().is_err());
    let mut g = ControllerGains::shared(1.0, 1.0, 1.2);
    assert!(g.is_shared());
    g.k_p[3] = 2.0;
    assert!(!g.is_shared());
}

#[test]
fn holding_still_without_gravity_tracks_exactly() {
    let plant = weightless_plant();
    let q = JointVector::from_column_slice(&[1.4, 0.2, -1.4, 0.1, 1.25, 1.5, 1.5, 1.5, 1.5]);
    let reference = still_reference(q, 101, 0.01);
    let gains = ControllerGains::shared(50.0, 10.0, 1.25);
    let r = rollout(&gains, &reference, &reference.initial_state(1.25), &plant, &RolloutSettings::default());
    assert!(r.summary.feasible);
    assert_eq!(r.samples.len(), 101);
    assert!(r.summary.tracking_cost <= 1e-9, "{}", r.summary.tracking_cost);
    assert!(r.summary.power_cost <= 1e-9);
}

#[test]
fn pd_pulls_a_weightless_robot_to_the_target() {
    let plant = weightless_plant();
    let q = JointVector::from_column_slice(&[1.4, 0.2, -1.4, 0.1, 1.25, 1.5, 1.5, 1.5, 1.5]);
    let reference = still_reference(q, 301, 0.01);
    let gains = ControllerGains::shared(200.0, 80.0, 1.25);
    let mut start = reference.initial_state(1.25);
    start.q[0] += 0.05;
    start.q[2] -= 0.05;
    let r = rollout(&gains, &reference, &start, &plant, &RolloutSettings::default());
    let first = r.samples[0].tracking_cost();
    let last = r.samples.last().unwrap().tracking_cost();
    assert!(r.summary.feasible);
    assert!(last < 0.05 * first, "{first} -> {last}");
}

#[test]
fn summary_is_recomputable_from_the_traces() {
    let (model, gait, reference) = case_one();
    let plant = Plant::new(&model, ContactParams::default(), &gait);
    let gains = ControllerGains::shared(80.0, 20.0, 1.3);
    let r = rollout(&gains, &reference, &reference.initial_state(1.3), &plant, &RolloutSettings::default());
    assert!(r.summary.feasible);
    assert_eq!(r.samples.len(), reference.len());

    let tracking: f64 = r
        .samples
        .iter()
        .map(|s| (0..N_JOINTS).map(|j| (s.q[j] - s.q_des[j]).abs() + (s.qdot[j] - s.qdot_des[j]).abs()).sum::<f64>())
        .sum();
    let power: f64 = r
        .samples
        .iter()
        .map(|s| (0..N_JOINTS).map(|j| (s.tau[j] * s.qdot[j]).abs()).sum::<f64>())
        .sum();
    let violations = r.samples.iter().filter(|s| s.zmp.is_some_and(|z| z.margin < 0.0)).count();
    let s = &r.summary;
    assert!((s.tracking_cost - tracking).abs() <= 1e-9 * tracking);
    assert!((s.power_cost - power).abs() <= 1e-9 * power);
    assert_eq!(s.violations, violations);
    assert!((s.cost - (tracking + power + 100.0 * violations as f64)).abs() <= 1e-9 * s.cost);
    assert!((s.energy_joules - power * reference.dt).abs() <= 1e-12 * power);

    // every recorded torque is the PD law at the sample
    for (k, sample) in r.samples.iter().enumerate() {
        let (q_des, qdot_des) = reference.desired(k, 1.3);
        let tau = pd_torque(&gains, &q_des, &sample.q, &qdot_des, &sample.qdot);
        assert!((tau - sample.tau).amax() <= 1e-12);
    }
    assert_eq!(&summarize(&r.samples, reference.dt, 100.0, None), s);
}

#[test]
fn substep_refinement_barely_moves_the_cost() {
    let (model, gait, reference) = case_one();
    let coarse = Plant::new(&model, ContactParams::default(), &gait);
    let mut fine = coarse.clone();
    fine.sim.substeps = 20;
    // a benchmark that tracks the gait without stubbing the riser
    let gains = ControllerGains::shared(200.0, 100.0, 1.3);
    let settings = RolloutSettings {
        feedforward: Feedforward::Gravity,
        ..Default::default()
    };
    let a = rollout(&gains, &reference, &reference.initial_state(1.3), &coarse, &settings);
    let b = rollout(&gains, &reference, &reference.initial_state(1.3), &fine, &settings);
    let rel = (a.cost() - b.cost()).abs() / a.cost();
    assert!(rel <= 0.01, "{} vs {}: {rel}", a.cost(), b.cost());
}

#[test]
fn disturbance_enters_the_recorded_torque() {
    let plant = weightless_plant();
    let q = JointVector::from_column_slice(&[1.4, 0.2, -1.4, 0.1, 1.25, 1.5, 1.5, 1.5, 1.5]);
    let reference = still_reference(q, 51, 0.01);
    let gains = ControllerGains::shared(50.0, 10.0, 1.25);
    let settings = RolloutSettings {
        disturbance: true,
        ..Default::default()
    };
    let r = rollout(&gains, &reference, &reference.initial_state(1.25), &plant, &settings);
    for (k, s) in r.samples.iter().enumerate() {
        let (q_des, qdot_des) = reference.desired(k, 1.25);
        let pd = pd_torque(&gains, &q_des, &s.q, &qdot_des, &s.qdot);
        let d = disturbance_torque(s.t);
        assert!((s.tau - pd).iter().all(|t| (t - d).abs() <= 1e-12));
    }
    assert!(r.summary.tracking_cost > 0.0);
}

#[test]
fn blow_up_gives_infinite_cost() {
    let plant = weightless_plant();
    let q = JointVector::from_column_slice(&[1.4, 0.2, -1.4, 0.1, 1.25, 1.5, 1.5, 1.5, 1.5]);
    let reference = still_reference(q, 11, 0.01);
    let mut start = reference.initial_state(1.25);
    start.qdot[6] = 500.0;
    let r = rollout(&ControllerGains::shared(0.0, 0.0, 1.25), &reference, &start, &plant, &RolloutSettings::default());
    assert!(!r.summary.feasible);
    assert!(r.cost().is_infinite());
    assert!(r.summary.failure.as_deref().unwrap().contains("blow-up"));
}

#[test]
fn rollouts_are_deterministic() {
    let plant = weightless_plant();
    let q = JointVector::from_column_slice(&[1.4, 0.2, -1.4, 0.1, 1.25, 1.5, 1.5, 1.5, 1.5]);
    let reference = still_reference(q, 41, 0.01);
    let mut start = reference.initial_state(1.1);
    start.qdot[0] = 0.3;
    let g = ControllerGains::shared(30.0, 4.0, 1.1);
    let a = rollout(&g, &reference, &start, &plant, &RolloutSettings::default());
    let b = rollout(&g, &reference, &start, &plant, &RolloutSettings::default());
    assert_eq!(a, b);
}

fn bowl(x: &[f64]) -> f64 {
    (x[0] - 20.0).powi(2) + (x[1] - 80.0).powi(2) + (x[2] - 1.25).powi(2)
}

#[test]
fn aco_finds_the_bottom_of_a_bowl() {
    let config = AcoConfig {
        seed: 5,
        ..Default::default()
    };
    let bounds = config.dimension_bounds();
    assert_eq!(bounds, vec![[0.0, 200.0], [0.0, 200.0], [1.0, 1.5]]);
    let r = aco_minimize(&config, &bounds, bowl).unwrap();
    assert!((r.best[0] - 20.0).abs() <= 1e-2, "{:?}", r.best);
    assert!((r.best[1] - 80.0).abs() <= 1e-2, "{:?}", r.best);
    assert!((r.best[2] - 1.25).abs() <= 1e-2, "{:?}", r.best);
    assert_eq!(r.curve.len(), 100);
    assert_eq!(r.evaluations, 30 + 30 * 100);
    assert!(r.curve.windows(2).all(|w| w[1].best_cost <= w[0].best_cost));
    assert_eq!(r.best_cost, r.curve.last().unwrap().best_cost);
}

#[test]
fn kernel_width_follows_the_evaporation_rate() {
    let base = AcoConfig::default();
    assert_eq!(base.width_multiplier(), 0.7);
    let narrow = AcoConfig {
        kernel_width: KernelWidth::Complement,
        ..base
    };
    assert!((narrow.width_multiplier() - 0.3).abs() <= 1e-15);
    let r = aco_minimize(&narrow, &narrow.dimension_bounds(), bowl).unwrap();
    assert!(r.curve.windows(2).all(|w| w[1].best_cost <= w[0].best_cost));
}

#[test]
fn aco_is_deterministic_per_seed() {
    let config = AcoConfig {
        n_iterations: 20,
        seed: 9,
        ..Default::default()
    };
    let bounds = config.dimension_bounds();
    let a = aco_minimize(&config, &bounds, bowl).unwrap();
    let b = aco_minimize(&config, &bounds, bowl).unwrap();
    assert_eq!(a, b);
    let c = aco_minimize(&AcoConfig { seed: 10, ..config }, &bounds, bowl).unwrap();
    assert_ne!(a.best, c.best);
}

#[test]
fn aco_reports_an_infeasible_box() {
    let config = AcoConfig::default();
    let r = aco_minimize(&config, &config.dimension_bounds(), |_| f64::INFINITY);
    assert!(matches!(r, Err(Error::Infeasible(_))));
}

#[test]
fn aco_config_validation() {
    assert!(AcoConfig::default().validate().is_ok());
    let bad = [
        AcoConfig { n_ants: 1, ..Default::default() },
        AcoConfig { n_iterations: 0, ..Default::default() },
        AcoConfig { evaporation: 1.0, ..Default::default() },
        AcoConfig { locality: 0.0, ..Default::default() },
        AcoConfig { archive_size: 1, ..Default::default() },
        AcoConfig {
            bounds: GainBounds {
                k_p: [-1.0, 10.0],
                ..Default::default()
            },
            ..Default::default()
        },
        AcoConfig {
            bounds: GainBounds {
                q5_torso: [1.5, 1.0],
                ..Default::default()
            },
            ..Default::default()
        },
    ];
    for c in bad {
        assert!(c.validate().is_err(), "{c:?}");
        assert!(aco_minimize(&c, &[[0.0, 1.0]], |x| x[0]).is_err());
    }
}

#[test]
fn per_joint_decision_vector_layout() {
    let config = AcoConfig {
        per_joint: true,
        ..Default::default()
    };
    let bounds = config.dimension_bounds();
    assert_eq!(bounds.len(), 2 * N_JOINTS + 1);
    let x: Vec<f64> = (0..bounds.len()).map(|i| i as f64).collect();
    let g = config.gains_from(&x);
    assert_eq!(g.k_p[4], 4.0);
    assert_eq!(g.k_d[0], 9.0);
    assert_eq!(g.q5_torso, 18.0);
    let shared = AcoConfig::default().gains_from(&[3.0, 4.0, 1.2]);
    assert_eq!(shared, ControllerGains::shared(3.0, 4.0, 1.2));
}

#[test]
fn aco_tune_maps_the_best_vector_to_gains() {
    let config = AcoConfig {
        n_iterations: 40,
        seed: 2,
        ..Default::default()
    };
    let plant = weightless_plant();
    let q = JointVector::from_column_slice(&[1.4, 0.2, -1.4, 0.1, 1.25, 1.5, 1.5, 1.5, 1.5]);
    let reference = still_reference(q, 3, 0.01);
    // a stand-in rollout whose cost is the bowl in gain space
    let tuned = aco_tune(&config, |g| {
        let mut r = rollout(g, &reference, &SimState::at_rest(q), &plant, &RolloutSettings::default());
        r.summary.cost = bowl(&[g.k_p[0], g.k_d[0], g.q5_torso]);
        r
    })
    .unwrap();
    assert!((tuned.gains.k_p[0] - 20.0).abs() < 1.0);
    assert!((tuned.gains.k_d[0] - 80.0).abs() < 1.0);
    assert!(tuned.gains.is_shared());
    assert_eq!(tuned.best_cost, tuned.curve.last().unwrap().best_cost);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn aco_candidates_stay_in_the_box(seed in any::<u64>(), a in -50.0f64..250.0, b in -1.0f64..3.0) {
        let config = AcoConfig { n_iterations: 5, n_ants: 8, archive_size: 6, seed, ..Default::default() };
        let bounds = config.dimension_bounds();
        let inside = std::sync::atomic::AtomicBool::new(true);
        let r = aco_minimize(&config, &bounds, |x| {
            if x.iter().zip(&bounds).any(|(v, [lo, hi])| v < lo || v > hi) {
                inside.store(false, std::sync::atomic::Ordering::Relaxed);
            }
            (x[0] - a).abs() + (x[2] - b).powi(2) + 1e-3 * x[1]
        }).unwrap();
        prop_assert!(inside.into_inner());
        prop_assert!(r.curve.windows(2).all(|w| w[1].best_cost <= w[0].best_cost));
    }
}

use mavforce_core::admittance::{AxisGains, Mode};
use mavforce_core::sim::config::{CoopConfig, SensorNoise, TruthIntegrator, WallConfig};
use mavforce_core::sim::trajectory::{ForceKey, Waypoint};
use mavforce_core::sim::{run, EventKind, Frame, ScenarioConfig, ScenarioKind, SimError, SimLog};

fn push(t0: f64, t1: f64, force: [f64; 3]) -> Vec<ForceKey> {
    vec![
        ForceKey { t: t0, force: [0.0; 3], torque: 0.0 },
        ForceKey { t: t1, force, torque: 0.0 },
    ]
}

fn wall_run(seed: u64, end_y: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig {
        kind: ScenarioKind::WallCollision,
        duration: 7.0,
        seed,
        wall: Some(WallConfig::default()),
        ..ScenarioConfig::default()
    };
    cfg.initial.position = [0.0, 1.0, 1.0];
    cfg.filter.process_noise.force = 10.0;
    cfg.trajectory = vec![
        Waypoint { t: 2.0, position: [0.0, 1.0, 1.0], yaw: 0.0 },
        Waypoint { t: 2.0 + (1.0 - end_y) / 1.2, position: [0.0, end_y, 1.0], yaw: 0.0 },
    ];
    cfg
}

fn leash(gains: AxisGains, force: [f64; 3], duration: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig {
        kind: ScenarioKind::Leash,
        duration,
        force_script: push(8.0, 8.5, force),
        ..ScenarioConfig::default()
    };
    cfg.admittance.gains.x = gains;
    cfg
}

fn rms_force_error(frames: &[Frame], from: f64) -> [f64; 3] {
    let rows: Vec<_> = frames.iter().filter(|f| f.t >= from).collect();
    std::array::from_fn(|i| {
        let s: f64 = rows.iter().map(|f| (f.estimate.unwrap().force[i] - f.true_wrench.force[i]).powi(2)).sum();
        (s / rows.len() as f64).sqrt()
    })
}

fn engaged_at(log: &SimLog) -> f64 {
    log.events
        .iter()
        .find_map(|e| match e.kind {
            EventKind::ModeChange { to: Mode::Engaged, .. } => Some(e.t),
            _ => None,
        })
        .expect("admittance engaged")
}

#[test]
fn same_seed_same_log_different_seed_different_log() {
    let cfg = ScenarioConfig {
        duration: 2.0,
        force_script: push(0.5, 1.0, [1.0, 0.0, -1.0]),
        ..ScenarioConfig::default()
    };
    assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
    let other = ScenarioConfig { seed: cfg.seed + 1, ..cfg.clone() };
    assert_ne!(run(&cfg).unwrap(), run(&other).unwrap());
}

#[test]
fn zero_noise_measures_ground_truth() {
    let cfg = ScenarioConfig {
        duration: 1.0,
        noise: SensorNoise::zero(),
        ..ScenarioConfig::default()
    };
    let log = run(&cfg).unwrap();
    for f in &log.vehicles[0].frames {
        assert_eq!(f.measurement.as_state(), f.truth);
    }
}

#[test]
fn estimate_rms_bounded_under_interaction_and_model_mismatch() {
    for integrator in [TruthIntegrator::Euler, TruthIntegrator::Rk4] {
        let mut cfg = leash(AxisGains::new(1.5, 4.0, 4.0), [2.0, -1.0, 1.0], 14.0);
        cfg.truth_integrator = integrator;
        let log = run(&cfg).unwrap();
        let rms = rms_force_error(&log.vehicles[0].frames, 0.5);
        assert!(rms.iter().all(|r| *r <= 0.6), "{integrator:?}: {rms:?}");
    }
}

#[test]
fn wall_detection_follows_contact_within_two_samples() {
    for seed in 1..=5 {
        let log = run(&wall_run(seed, -3.0)).unwrap();
        let contact = log.events_named("contact").next().expect("contact").t;
        let detected = log.events_named("collision_detected").next().expect("detection").t;
        assert!(detected >= contact, "seed {seed}: false alarm at {detected} before contact at {contact}");
        let latency = log.collision_latency().unwrap();
        assert!(latency <= 0.02 + 1e-9, "seed {seed}: latency {latency}");
    }
}

#[test]
fn stopping_short_of_the_wall_raises_nothing() {
    let log = run(&wall_run(7, -1.2)).unwrap();
    assert_eq!(log.events_named("contact").count(), 0);
    assert_eq!(log.events_named("collision_detected").count(), 0);
    let f = log.vehicles[0].frames.last().unwrap();
    assert!((f.truth.position.y + 1.2).abs() < 0.05);
}

#[test]
fn safe_reference_offset_grows_with_peak_force() {
    let cfg = wall_run(7, -3.0);
    let gain = cfg.wall.unwrap().safe_gain;
    let log = run(&cfg).unwrap();
    let safe: Vec<_> = log
        .events
        .iter()
        .filter_map(|e| match e.kind {
            EventKind::SafeReference { position, peak_force } => Some((position, peak_force)),
            _ => None,
        })
        .collect();
    assert!(safe.len() >= 2, "{safe:?}");
    let (p0, f0) = safe[0];
    for (p, f) in &safe[1..] {
        let moved = (p - p0).norm();
        assert!((moved - gain * (f - f0)).abs() < 1e-12, "moved {moved} for {} N", f - f0);
    }
    // The reference backs away from the wall, which sits on the -y side.
    let (last, peak) = *safe.last().unwrap();
    assert!(last.y > -1.65 && peak > cfg.wall.unwrap().detection_threshold);
}

#[test]
fn closed_loop_offset_is_force_over_stiffness() {
    let log = run(&leash(AxisGains::new(1.5, 10.0, 10.0), [5.0, 0.0, 0.0], 20.0)).unwrap();
    let late: Vec<_> = log.vehicles[0].frames.iter().filter(|f| f.t > 15.0).collect();
    let mean = late.iter().map(|f| f.reference.position.x).sum::<f64>() / late.len() as f64;
    assert!((mean - 0.5).abs() <= 0.005, "offset {mean}");
}

#[test]
fn zero_stiffness_reference_moves_at_force_over_damping() {
    let log = run(&leash(AxisGains::new(1.5, 10.0, 0.0), [5.0, 0.0, 0.0], 20.0)).unwrap();
    let late: Vec<_> = log.vehicles[0].frames.iter().filter(|f| f.t > 15.0).collect();
    let (a, b) = (late[0], late[late.len() - 1]);
    let slope = (b.reference.position.x - a.reference.position.x) / (b.t - a.t);
    assert!((slope - 0.5).abs() <= 0.01, "speed {slope}");
}

#[test]
fn unforced_leash_holds_its_pose() {
    let log = run(&leash(AxisGains::new(1.5, 4.0, 0.0), [0.0; 3], 15.0)).unwrap();
    assert!(engaged_at(&log) < 6.0);
    for f in log.vehicles[0].frames.iter().filter(|f| f.t > 1.0) {
        let err = (f.truth.position - nalgebra::Vector3::new(0.0, 0.0, 1.0)).norm();
        assert!(err < 0.05, "t = {}: {err}", f.t);
    }
}

/// Standard deviation of the hover force estimate per axis and of the
/// torque estimate.
fn hover_noise() -> [f64; 4] {
    let log = run(&ScenarioConfig { duration: 30.0, ..ScenarioConfig::default() }).unwrap();
    let rows: Vec<_> = log.vehicles[0].frames.iter().filter(|f| f.t > 2.0).map(|f| f.estimate.unwrap()).collect();
    let n = rows.len() as f64;
    std::array::from_fn(|i| {
        let x = |w: &mavforce_core::dynamics::Wrench| if i < 3 { w.force[i] } else { w.torque };
        let mean = rows.iter().map(x).sum::<f64>() / n;
        (rows.iter().map(|w| (x(w) - mean).powi(2)).sum::<f64>() / n).sqrt()
    })
}

fn hover_drift(deadband_sigmas: f64) -> f64 {
    let sigma = hover_noise();
    let mut cfg = ScenarioConfig {
        kind: ScenarioKind::Leash,
        duration: 70.0,
        ..ScenarioConfig::default()
    };
    cfg.admittance.fsm.deadband = sigma.map(|s| deadband_sigmas * s);
    let log = run(&cfg).unwrap();
    let t0 = engaged_at(&log);
    let frames: Vec<_> = log.vehicles[0].frames.iter().filter(|f| f.t >= t0 && f.t <= t0 + 60.0).collect();
    let start = frames[0].reference.position;
    frames.iter().map(|f| (f.reference.position - start).norm()).fold(0.0, f64::max)
}

#[test]
fn hover_reference_drift_with_three_sigma_deadband() {
    let drift = hover_drift(3.0);
    assert!(drift < 1e-3, "reference drifted {:.2} mm in 60 s", drift * 1e3);
}

#[test]
fn hover_reference_drift_with_four_sigma_deadband() {
    let drift = hover_drift(4.0);
    assert!(drift < 1e-3, "reference drifted {:.2} mm in 60 s", drift * 1e3);
}

#[test]
fn runaway_master_trips_divergence_with_partial_log() {
    let mut cfg = ScenarioConfig {
        kind: ScenarioKind::CoopTransport,
        duration: 10.0,
        coop: Some(CoopConfig::default()),
        ..ScenarioConfig::default()
    };
    cfg.initial.position = [0.0, 0.0, 1.5];
    cfg.trajectory = vec![
        Waypoint { t: 2.0, position: [0.0, 0.0, 1.5], yaw: 0.0 },
        Waypoint { t: 2.5, position: [4.0, 0.0, 1.5], yaw: 0.0 },
    ];
    match run(&cfg) {
        Err(SimError::DivergenceDetected { t, separation, log }) => {
            assert!(t > 2.0 && t < 10.0 && separation > 2.2);
            assert_eq!(log.vehicles[1].frames.last().unwrap().t, t);
            assert_eq!(log.events.last().unwrap().kind.name(), "divergence");
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

use std::f64::consts::PI;

use nalgebra::{Vector3, Vector4};
use proptest::prelude::*;

use mavforce_core::admittance::{
    admittance_step, AdmittanceController, AdmittanceGains, AdmittanceSign, AxisGains, AxisState, FsmConfig, Mode,
    ReferencePose,
};
use mavforce_core::dynamics::{self, allocate, RotorSpeeds, SimState, VehicleParams, Wrench};
use mavforce_core::math::{omega_matrix, Mrp, UnitQuaternion};
use mavforce_core::sim::rope::{rope_force, RopeModel};
use mavforce_core::sim::wall::wall_force;
use mavforce_core::sim::config::WallConfig;

fn vec3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    [-r..r, -r..r, -r..r].prop_map(|[x, y, z]| Vector3::new(x, y, z))
}

fn axis() -> impl Strategy<Value = Vector3<f64>> {
    vec3(1.0).prop_filter("non-degenerate axis", |v| v.norm() > 1e-3).prop_map(|v| v.normalize())
}

fn quat() -> impl Strategy<Value = UnitQuaternion> {
    (axis(), 0.0..PI).prop_map(|(a, t)| UnitQuaternion::from_axis_angle(&a, t))
}

fn max_diff(a: &UnitQuaternion, b: &UnitQuaternion) -> f64 {
    (a.as_vector4() - b.as_vector4()).amax()
}

fn state() -> impl Strategy<Value = SimState> {
    (vec3(3.0), vec3(2.0), axis(), 0.0..0.6, vec3(1.5)).prop_map(|(p, v, a, t, w)| SimState {
        position: p,
        velocity: v,
        attitude: UnitQuaternion::from_axis_angle(&a, t),
        angular_rate: w,
    })
}

fn rotors() -> impl Strategy<Value = RotorSpeeds> {
    prop::array::uniform6(300.0..900.0f64).prop_map(RotorSpeeds)
}

fn wrench() -> impl Strategy<Value = Wrench> {
    (vec3(10.0), -0.5..0.5).prop_map(|(f, t)| Wrench::new(f, t))
}

proptest! {
    #[test]
    fn mrp_round_trip_recovers_quaternion(
        a in axis(),
        angle in 0.0..179f64.to_radians(),
        ai in 0usize..3,
    ) {
        let shape = [0.0, 0.5, 1.0][ai];
        let q = UnitQuaternion::from_axis_angle(&a, angle);
        let back = Mrp::from_quat(&q, shape).unwrap().to_quat(shape);
        prop_assert!(max_diff(&back, &q) < 1e-12);
        prop_assert!(back.scalar() >= 0.0);
    }

    #[test]
    fn rate_integration_keeps_unit_norm(q0 in quat(), w in vec3(4.0)) {
        let mut q = q0;
        let m = omega_matrix(&w, 0.01);
        let mut raw: Vector4<f64> = q0.as_vector4();
        for _ in 0..10_000 {
            q = q.integrate(&w, 0.01);
            raw = m * raw;
        }
        prop_assert!((raw.norm() - 1.0).abs() < 1e-9);
        prop_assert!((q.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_rate_integration_matches_axis_angle(q0 in quat(), a in axis(), rate in 0.01..5.0f64, n in 1usize..2000) {
        let ts = 0.01;
        let w = a * rate;
        let mut q = q0;
        for _ in 0..n {
            q = q.integrate(&w, ts);
        }
        let exact = q0 * UnitQuaternion::from_axis_angle(&a, rate * ts * n as f64);
        prop_assert!(q.angle_to(&exact) < 1e-9);
    }

    #[test]
    fn rotation_of_product_is_product_of_rotations(a in quat(), b in quat()) {
        let lhs = (a * b).to_rotation_matrix();
        let rhs = a.to_rotation_matrix() * b.to_rotation_matrix();
        prop_assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn velocity_step_is_linear_in_force(s in state(), n in rotors(), w1 in wrench(), w2 in wrench()) {
        let p = VehicleParams::default();
        let v = |w: Wrench| dynamics::step(&s, &n, &w, &p).velocity;
        let residual = v(w1 + w2) - v(w1) - v(w2) + v(Wrench::zero());
        prop_assert!(residual.amax() < 1e-12);
    }

    #[test]
    fn equal_rotor_speeds_give_no_body_torque(speed in 0.0..1100.0f64) {
        let u = allocate(&RotorSpeeds::uniform(speed), &VehicleParams::default());
        prop_assert_eq!(u.torque.amax(), 0.0);
    }

    #[test]
    fn thrust_acts_along_body_z(s in state(), n in rotors()) {
        let p = VehicleParams { drag_constant: 0.0, ..VehicleParams::default() };
        let u = allocate(&n, &p);
        let a = dynamics::translational_accel(&s, u.thrust, &n, &Wrench::zero(), &p)
            + Vector3::new(0.0, 0.0, p.gravity);
        let body_z = s.attitude.to_rotation_matrix().column(2).into_owned();
        prop_assert!((a - body_z * (u.thrust / p.mass)).amax() < 1e-12);
    }

    #[test]
    fn free_fall_energy_drift_is_euler_order(s in state(), ts in 0.001..0.01f64) {
        // Explicit Euler on free fall gains exactly m g^2 ts^2 / 2 per step.
        let p = VehicleParams { ts, drag_constant: 0.0, ..VehicleParams::default() };
        let n = RotorSpeeds::default();
        let energy = |x: &SimState| 0.5 * p.mass * x.velocity.norm_squared() + p.mass * p.gravity * x.position.z;
        let (mut euler, mut rk4) = (s, s);
        for _ in 0..100 {
            euler = dynamics::step(&euler, &n, &Wrench::zero(), &p);
            rk4 = dynamics::step_rk4(&rk4, &n, &Wrench::zero(), &p, 4);
        }
        let oracle = 100.0 * 0.5 * p.mass * p.gravity.powi(2) * ts * ts;
        prop_assert!((energy(&euler) - energy(&s) - oracle).abs() < 1e-9 * (1.0 + energy(&s).abs()));
        prop_assert!((energy(&rk4) - energy(&s)).abs() < 1e-9 * (1.0 + energy(&s).abs()));
    }

    #[test]
    fn admittance_settles_at_force_over_stiffness(
        m in 0.5..3.0f64,
        c in 2.0..20.0f64,
        k in 1.0..30.0f64,
        f in -10.0..10.0f64,
    ) {
        let g = AxisGains::new(m, c, k);
        let ts = 0.01;
        prop_assume!(g.spectral_radius(ts) < 1.0);
        let gains = AdmittanceGains { x: g, ..AdmittanceGains::default() };
        let tau = (2.0 * m / c).max(c / k);
        let steps = (10.0 * tau / ts).ceil() as usize;
        let mut axes = [AxisState::default(); 4];
        let desired = ReferencePose::default();
        let w = Wrench::new(Vector3::new(f, 0.0, 0.0), 0.0);
        let mut out = desired;
        for _ in 0..steps {
            out = admittance_step(&mut axes, &desired, &w, &gains, AdmittanceSign::Compliant, ts);
        }
        prop_assert!((out.position.x - f / k).abs() <= 0.01 * (f / k).abs() + 1e-9);
    }

    #[test]
    fn bounded_wrench_gives_bounded_reference(
        m in 0.5..3.0f64,
        c in 1.0..20.0f64,
        k in 0.5..30.0f64,
        ts in 0.001..0.01f64,
        inputs in prop::collection::vec(-5.0..5.0f64, 500),
    ) {
        let g = AxisGains::new(m, c, k);
        prop_assume!(g.spectral_radius(ts) < 1.0 - 1e-6);
        let gains = AdmittanceGains { x: g, ..AdmittanceGains::default() };
        let desired = ReferencePose::default();
        let sign = AdmittanceSign::Compliant;
        // l1 norm of the impulse response bounds the output for |F| <= 5.
        let mut axes = [AxisState::default(); 4];
        let mut l1 = 0.0;
        let mut w = Wrench::new(Vector3::new(1.0, 0.0, 0.0), 0.0);
        for _ in 0..200_000 {
            l1 += admittance_step(&mut axes, &desired, &w, &gains, sign, ts).position.x.abs();
            w = Wrench::zero();
        }
        let mut axes = [AxisState::default(); 4];
        for f in inputs.iter().cycle().take(5000) {
            let x = admittance_step(&mut axes, &desired, &Wrench::new(Vector3::new(*f, 0.0, 0.0), 0.0), &gains, sign, ts)
                .position
                .x;
            prop_assert!(x.abs() <= 5.0 * l1 * (1.0 + 1e-9));
        }
    }

    #[test]
    fn yaw_uses_the_translational_integrator(
        m in 0.05..2.0f64,
        c in 0.1..5.0f64,
        k in 0.0..5.0f64,
        torques in prop::collection::vec(-0.05..0.05f64, 100),
    ) {
        let g = AxisGains::new(m, c, k);
        let gains = AdmittanceGains { x: g, yaw: g, ..AdmittanceGains::default() };
        let desired = ReferencePose::new(Vector3::new(0.2, 0.0, 0.0), 0.2);
        let mut axes = [0.2, 0.0, 0.0, 0.2].map(|position| AxisState { position, velocity: 0.0 });
        for t in torques {
            let w = Wrench::new(Vector3::new(t, 0.0, 0.0), t);
            let out = admittance_step(&mut axes, &desired, &w, &gains, AdmittanceSign::Compliant, 0.01);
            prop_assert!((out.yaw - out.position.x).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_frozen_unless_engaged(
        events in prop::collection::vec((vec3(15.0), any::<bool>()), 1..400),
    ) {
        let fsm = FsmConfig { t_avg: 0.05, t_landing: 0.03, ..FsmConfig::default() };
        let gains = AdmittanceGains::default();
        let start = ReferencePose::new(Vector3::new(0.0, 0.0, 1.0), 0.0);
        let mut c = AdmittanceController::new(gains, fsm, AdmittanceSign::Compliant, 0.01, start).unwrap();
        let desired = start;
        let mut last = c.output();
        for (f, hover) in events {
            let (out, _) = c.tick(&desired, &Wrench::new(f, 0.0), hover);
            if c.mode() != Mode::Engaged {
                prop_assert_eq!(out, last);
            }
            last = out;
        }
    }

    #[test]
    fn rope_forces_are_equal_and_opposite(a in vec3(3.0), b in vec3(3.0), va in vec3(2.0), vb in vec3(2.0)) {
        let (on_a, on_b) = rope_force(&a, &b, &va, &vb, &RopeModel::default());
        prop_assert!((on_a + on_b).amax() == 0.0);
    }

    #[test]
    fn wall_penetration_bounded_by_peak_force(speed in 0.1..3.0f64, mass in 0.5..3.0f64) {
        // Point mass driven into the wall; the penalty force is the only force.
        let wall = WallConfig::default();
        let i = wall.axis.index();
        let dt = 1e-5;
        let mut p = Vector3::zeros();
        p[i] = wall.offset + wall.normal_sign * wall.contact_radius;
        let mut v = Vector3::zeros();
        v[i] = -wall.normal_sign * speed;
        let (mut depth, mut peak) = (0.0f64, 0.0f64);
        for _ in 0..200_000 {
            let f = wall_force(&p, &v, &wall);
            peak = peak.max(f.norm());
            v += f / mass * dt;
            p += v * dt;
            depth = depth.max(wall.contact_radius - wall.normal_sign * (p[i] - wall.offset));
            if v[i] * wall.normal_sign > 0.0 && f.norm() == 0.0 {
                break;
            }
        }
        prop_assert!(depth > 0.0);
        prop_assert!(depth <= peak / wall.stiffness * (1.0 + 1e-6));
        // Penalty damping dissipates: the mass leaves slower than it came.
        prop_assert!((v[i] * wall.normal_sign) < speed);
    }
}

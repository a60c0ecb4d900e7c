//! Surrogate pose tracker: PID on position producing a desired thrust
//! vector, geometric attitude PD on SO(3), pseudo-inverse allocation with
//! rotor-speed saturation.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::admittance::ReferencePose;
use crate::dynamics::{rotor_gyro_torque, RotorSpeeds, SimState, VehicleParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerGains {
    /// Position gain, 1/s^2.
    pub kp: f64,
    /// Velocity gain, 1/s.
    pub kd: f64,
    /// Integral gain, 1/s^3.
    pub ki: f64,
    /// Errors larger than this (m) do not feed the integrator.
    pub integral_zone: f64,
    /// Bound on the integral contribution, m/s^2.
    pub integral_limit: f64,
    /// rad
    pub max_tilt: f64,
    /// Bounds on commanded vertical acceleration, m/s^2.
    pub max_climb_accel: f64,
    pub max_descent_accel: f64,
    /// Roll/pitch loop natural frequency, rad/s.
    pub attitude_freq: f64,
    /// Yaw loop natural frequency, rad/s.
    pub yaw_freq: f64,
    pub attitude_damping: f64,
    /// rad/s
    pub max_rotor_speed: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            kp: 24.0,
            kd: 10.0,
            ki: 12.0,
            integral_zone: 0.5,
            integral_limit: 4.0,
            max_tilt: 0.6,
            max_climb_accel: 8.0,
            max_descent_accel: 6.0,
            attitude_freq: 20.0,
            yaw_freq: 6.0,
            attitude_damping: 1.0,
            max_rotor_speed: 1100.0,
        }
    }
}

fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Commanded acceleration from the position error; `integral` is the
/// accumulated error in m s.
fn position_law(
    state: &SimState,
    reference: &ReferencePose,
    integral: &Vector3<f64>,
    gains: &ControllerGains,
) -> Vector3<f64> {
    let e = state.position - reference.position;
    let i_term = (integral * gains.ki).map(|x| x.clamp(-gains.integral_limit, gains.integral_limit));
    let mut acc = -e * gains.kp - state.velocity * gains.kd - i_term;
    acc.z = acc.z.clamp(-gains.max_descent_accel, gains.max_climb_accel);
    acc
}

/// Attitude and allocation stage for a commanded acceleration.
fn attitude_law(
    state: &SimState,
    acc: &Vector3<f64>,
    yaw: f64,
    gains: &ControllerGains,
    params: &VehicleParams,
    pinv: &SMatrix<f64, 6, 4>,
) -> RotorSpeeds {
    let g = params.gravity;

    // Desired body z, tilt-limited.
    let vertical = acc.z + g;
    let horizontal = Vector3::new(acc.x, acc.y, 0.0);
    let max_h = vertical.max(0.0) * gains.max_tilt.tan();
    let h = horizontal.norm();
    let horizontal = if h > max_h && h > 0.0 { horizontal * (max_h / h) } else { horizontal };
    let f_des = (horizontal + Vector3::new(0.0, 0.0, vertical)) * params.mass;

    let r = state.attitude.to_rotation_matrix();
    let z_b = r.column(2).into_owned();
    let thrust = f_des.dot(&z_b).max(0.0);

    let z_d = if f_des.norm() > 1e-9 { f_des.normalize() } else { Vector3::z() };
    let x_c = Vector3::new(yaw.cos(), yaw.sin(), 0.0);
    let y_d = {
        let y = z_d.cross(&x_c);
        if y.norm() > 1e-9 { y.normalize() } else { Vector3::y() }
    };
    let x_d = y_d.cross(&z_d);
    let r_d = Matrix3::from_columns(&[x_d, y_d, z_d]);

    let e_r = vee(&(r_d.transpose() * r - r.transpose() * r_d)) * 0.5;
    let omega = state.angular_rate;
    let freq = Vector3::new(gains.attitude_freq, gains.attitude_freq, gains.yaw_freq);
    let alpha = -e_r.component_mul(&freq.component_mul(&freq))
        - omega.component_mul(&freq) * (2.0 * gains.attitude_damping);
    let j = Vector3::from(params.inertia);
    let jw = j.component_mul(&omega);
    let base = j.component_mul(&alpha) + omega.cross(&jw);

    let n_max = gains.max_rotor_speed;
    let solve = |torque: Vector3<f64>| {
        let u = SVector::<f64, 4>::new(torque.x, torque.y, torque.z, thrust);
        let n2 = pinv * u;
        RotorSpeeds(std::array::from_fn(|i| n2[i].clamp(0.0, n_max * n_max).sqrt()))
    };
    // Gyroscopic compensation needs the speeds it shapes: estimate them from
    // the thrust, then refine once.
    let guess = RotorSpeeds::uniform((thrust / (6.0 * params.thrust_constant)).sqrt().min(n_max));
    let first = solve(base + rotor_gyro_torque(&omega, &guess, params));
    solve(base + rotor_gyro_torque(&omega, &first, params))
}

fn pseudo_inverse(params: &VehicleParams) -> SMatrix<f64, 6, 4> {
    let a = params.allocation_matrix();
    let aat = a * a.transpose();
    // K A has full row rank for any valid parameter set.
    a.transpose() * aat.try_inverse().expect("allocation matrix has full row rank")
}

/// Memoryless PD tracker (no integral action).
pub fn pose_controller(
    state: &SimState,
    reference: &ReferencePose,
    gains: &ControllerGains,
    params: &VehicleParams,
) -> RotorSpeeds {
    let acc = position_law(state, reference, &Vector3::zeros(), gains);
    attitude_law(state, &acc, reference.yaw, gains, params, &pseudo_inverse(params))
}

/// Tracker with integral action on position.
#[derive(Debug, Clone)]
pub struct PoseController {
    gains: ControllerGains,
    params: VehicleParams,
    pinv: SMatrix<f64, 6, 4>,
    integral: Vector3<f64>,
}

impl PoseController {
    pub fn new(gains: ControllerGains, params: VehicleParams) -> Self {
        Self {
            gains,
            params,
            pinv: pseudo_inverse(&params),
            integral: Vector3::zeros(),
        }
    }

    pub fn gains(&self) -> &ControllerGains {
        &self.gains
    }

    pub fn integral(&self) -> Vector3<f64> {
        self.integral
    }

    pub fn reset(&mut self) {
        self.integral = Vector3::zeros();
    }

    pub fn compute(&mut self, state: &SimState, reference: &ReferencePose) -> RotorSpeeds {
        let e = state.position - reference.position;
        let ts = self.params.ts;
        let bound = if self.gains.ki > 0.0 {
            self.gains.integral_limit / self.gains.ki
        } else {
            0.0
        };
        for i in 0..3 {
            if e[i].abs() < self.gains.integral_zone {
                self.integral[i] = (self.integral[i] + e[i] * ts).clamp(-bound, bound);
            }
        }
        let acc = position_law(state, reference, &self.integral, &self.gains);
        attitude_law(state, &acc, reference.yaw, &self.gains, &self.params, &self.pinv)
    }
}

//! Hexacopter rigid-body model with an external wrench.
//!
//! Continuous accelerations plus the discrete step (forward Euler on
//! position, velocity and body rate; closed-form rate integration on the
//! attitude). The same step serves as simulator ground truth and as the
//! estimator's process model.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::math::UnitQuaternion;

pub type AllocationMatrix = SMatrix<f64, 4, 6>;

/// Which roll row of the allocation matrix to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationVariant {
    /// Roll row `[s, 1, s, -s, -1, -s]`: equal rotor speeds give zero torque.
    #[default]
    Corrected,
    /// Roll row `[s, 1, s, -s, -1, s]` as printed in the reference allocation.
    PaperVerbatim,
}

/// Ordering of the propeller gyroscopic torque vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GyroVariant {
    /// `Jr * Omega_r * [wy, wx, 0]`.
    #[default]
    PaperVerbatim,
    /// `Jr * Omega_r * [wy, -wx, 0]`.
    Standard,
}

/// Physical constants of the vehicle. All quantities SI; rotor speed in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Mass, kg.
    pub mass: f64,
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
    /// Diagonal inertia (Jxx, Jyy, Jzz), kg m^2.
    pub inertia: [f64; 3],
    /// Rotor inertia about its spin axis, kg m^2.
    pub rotor_inertia: f64,
    /// Boom length, m.
    pub boom_length: f64,
    /// Rotor thrust constant, N s^2.
    pub thrust_constant: f64,
    /// Rotor moment constant, m.
    pub moment_constant: f64,
    /// Aerodynamic drag constant, N s^2/m. The sign is applied verbatim.
    pub drag_constant: f64,
    /// Sample time, s.
    pub ts: f64,
    pub allocation: AllocationVariant,
    pub gyro: GyroVariant,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1.5,
            gravity: 9.81,
            inertia: [0.0347, 0.0458, 0.0977],
            rotor_inertia: 1e-4,
            boom_length: 0.215,
            thrust_constant: 6.7e-6,
            moment_constant: 0.016,
            drag_constant: 1e-6,
            ts: 0.01,
            allocation: AllocationVariant::Corrected,
            gyro: GyroVariant::PaperVerbatim,
        }
    }
}

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
#[error("invalid vehicle parameter `{name}` = {value}: must be finite and > 0")]
pub struct InvalidParam {
    pub name: &'static str,
    pub value: f64,
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), InvalidParam> {
        let checks = [
            ("mass", self.mass),
            ("gravity", self.gravity),
            ("inertia[0]", self.inertia[0]),
            ("inertia[1]", self.inertia[1]),
            ("inertia[2]", self.inertia[2]),
            ("rotor_inertia", self.rotor_inertia),
            ("boom_length", self.boom_length),
            ("thrust_constant", self.thrust_constant),
            ("moment_constant", self.moment_constant),
            ("ts", self.ts),
        ];
        for (name, value) in checks {
            if !(value.is_finite() && value > 0.0) {
                return Err(InvalidParam { name, value });
            }
        }
        if !self.drag_constant.is_finite() {
            return Err(InvalidParam {
                name: "drag_constant",
                value: self.drag_constant,
            });
        }
        Ok(())
    }

    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(self.inertia))
    }

    /// Geometry matrix `A` and row gains `K`.
    fn allocation_parts(&self) -> (AllocationMatrix, SVector<f64, 4>) {
        let s = 0.5;
        let c = 0.75f64.sqrt();
        let last_roll = match self.allocation {
            AllocationVariant::Corrected => -s,
            AllocationVariant::PaperVerbatim => s,
        };
        #[rustfmt::skip]
        let a = AllocationMatrix::new(
            s,   1.0, s,   -s,  -1.0, last_roll,
            -c,  0.0, c,   c,   0.0,  -c,
            -1.0, 1.0, -1.0, 1.0, -1.0, 1.0,
            1.0, 1.0, 1.0, 1.0, 1.0,  1.0,
        );
        let lk = self.boom_length * self.thrust_constant;
        let k = SVector::<f64, 4>::new(
            lk,
            lk,
            self.thrust_constant * self.moment_constant,
            self.thrust_constant,
        );
        (a, k)
    }

    /// `K A`, mapping squared rotor speeds to `[U1, U2, U3, U4]`.
    pub fn allocation_matrix(&self) -> AllocationMatrix {
        let (a, k) = self.allocation_parts();
        SMatrix::<f64, 4, 4>::from_diagonal(&k) * a
    }

    /// Speed at which six equal rotors balance gravity.
    pub fn hover_rotor_speed(&self) -> f64 {
        (self.mass * self.gravity / (6.0 * self.thrust_constant)).sqrt()
    }
}

/// Six rotor speeds, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RotorSpeeds(pub [f64; 6]);

impl RotorSpeeds {
    pub fn uniform(n: f64) -> Self {
        RotorSpeeds([n; 6])
    }

    pub fn hover(params: &VehicleParams) -> Self {
        Self::uniform(params.hover_rotor_speed())
    }

    pub fn squared(&self) -> SVector<f64, 6> {
        SVector::<f64, 6>::from_iterator(self.0.iter().map(|n| n * n))
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn abs_sum(&self) -> f64 {
        self.0.iter().map(|n| n.abs()).sum()
    }
}

/// Body torques `U1..U3` (N m) and total body-z thrust `U4` (N).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlMoments {
    pub torque: Vector3<f64>,
    pub thrust: f64,
}

/// Ground-truth rigid-body state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimState {
    /// Inertial position, m.
    pub position: Vector3<f64>,
    /// Inertial velocity, m/s.
    pub velocity: Vector3<f64>,
    /// Body-to-inertial attitude.
    pub attitude: UnitQuaternion,
    /// Body angular rate, rad/s.
    pub angular_rate: Vector3<f64>,
}

impl SimState {
    pub fn at_rest(position: Vector3<f64>, yaw: f64) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            attitude: UnitQuaternion::from_yaw(yaw),
            angular_rate: Vector3::zeros(),
        }
    }
}

/// External wrench: inertial-frame force (N) and body-z torque (N m).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: f64,
}

impl Wrench {
    pub fn new(force: Vector3<f64>, torque: f64) -> Self {
        Self { force, torque }
    }

    pub fn zero() -> Self {
        Self::default()
    }
}

impl std::ops::Add for Wrench {
    type Output = Wrench;
    fn add(self, o: Wrench) -> Wrench {
        Wrench::new(self.force + o.force, self.torque + o.torque)
    }
}

impl std::ops::Sub for Wrench {
    type Output = Wrench;
    fn sub(self, o: Wrench) -> Wrench {
        Wrench::new(self.force - o.force, self.torque - o.torque)
    }
}

/// `[U1..U4] = K A [n1^2..n6^2]`.
///
/// Positive and negative terms of each row are summed separately, so a
/// row whose coefficients cancel gives exactly zero for equal speeds.
pub fn allocate(n: &RotorSpeeds, params: &VehicleParams) -> ControlMoments {
    let (a, k) = params.allocation_parts();
    let sq = n.squared();
    let u = SVector::<f64, 4>::from_fn(|r, _| {
        let (mut pos, mut neg) = (0.0, 0.0);
        for (i, q) in sq.iter().enumerate() {
            let coef = a[(r, i)];
            if coef > 0.0 {
                pos += coef * q;
            } else {
                neg -= coef * q;
            }
        }
        k[r] * (pos - neg)
    });
    ControlMoments {
        torque: Vector3::new(u[0], u[1], u[2]),
        thrust: u[3],
    }
}

/// Aerodynamic force `k_drag * sum|n_i| * [vx, vy, 0]`, added in the body
/// frame alongside thrust.
pub fn aero_force(velocity: &Vector3<f64>, n: &RotorSpeeds, params: &VehicleParams) -> Vector3<f64> {
    Vector3::new(velocity.x, velocity.y, 0.0) * (params.drag_constant * n.abs_sum())
}

/// Inertial linear acceleration.
pub fn translational_accel(
    state: &SimState,
    thrust: f64,
    n: &RotorSpeeds,
    wrench: &Wrench,
    params: &VehicleParams,
) -> Vector3<f64> {
    let body = Vector3::new(0.0, 0.0, thrust) + aero_force(&state.velocity, n, params);
    state.attitude.rotate(&body) / params.mass - Vector3::new(0.0, 0.0, params.gravity)
        + wrench.force / params.mass
}

/// Propeller gyroscopic torque.
pub fn rotor_gyro_torque(omega: &Vector3<f64>, n: &RotorSpeeds, params: &VehicleParams) -> Vector3<f64> {
    let rotor_rate = n.sum() - 6.0 * omega.z;
    let lever = match params.gyro {
        GyroVariant::PaperVerbatim => Vector3::new(omega.y, omega.x, 0.0),
        GyroVariant::Standard => Vector3::new(omega.y, -omega.x, 0.0),
    };
    lever * (params.rotor_inertia * rotor_rate)
}

/// Body angular acceleration.
pub fn rotational_accel(
    omega: &Vector3<f64>,
    moments: &ControlMoments,
    torque_z: f64,
    n: &RotorSpeeds,
    params: &VehicleParams,
) -> Vector3<f64> {
    let j = Vector3::from(params.inertia);
    let jw = j.component_mul(omega);
    let total = moments.torque + Vector3::new(0.0, 0.0, torque_z)
        - omega.cross(&jw)
        - rotor_gyro_torque(omega, n, params);
    total.component_div(&j)
}

/// Continuous-time derivative `(p_dot, v_dot, omega_dot)`.
pub fn derivatives(
    state: &SimState,
    n: &RotorSpeeds,
    wrench: &Wrench,
    params: &VehicleParams,
) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let u = allocate(n, params);
    let accel = translational_accel(state, u.thrust, n, wrench, params);
    let alpha = rotational_accel(&state.angular_rate, &u, wrench.torque, n, params);
    (state.velocity, accel, alpha)
}

/// One discrete step at `params.ts`.
pub fn step(state: &SimState, n: &RotorSpeeds, wrench: &Wrench, params: &VehicleParams) -> SimState {
    step_with(state, n, wrench, params, params.ts)
}

fn step_with(
    state: &SimState,
    n: &RotorSpeeds,
    wrench: &Wrench,
    params: &VehicleParams,
    dt: f64,
) -> SimState {
    let (p_dot, v_dot, w_dot) = derivatives(state, n, wrench, params);
    SimState {
        position: state.position + p_dot * dt,
        velocity: state.velocity + v_dot * dt,
        attitude: state.attitude.integrate(&state.angular_rate, dt),
        angular_rate: state.angular_rate + w_dot * dt,
    }
}

/// Classic RK4 over `substeps` sub-intervals of `params.ts`, with the
/// attitude kinematics `q_dot = q * (omega, 0) / 2`. Used to create a
/// ground truth that differs from the Euler process model.
pub fn step_rk4(
    state: &SimState,
    n: &RotorSpeeds,
    wrench: &Wrench,
    params: &VehicleParams,
    substeps: usize,
) -> SimState {
    let h = params.ts / substeps.max(1) as f64;
    let mut s = *state;
    for _ in 0..substeps.max(1) {
        s = rk4_substep(&s, n, wrench, params, h);
    }
    s
}

type Flat = SVector<f64, 13>;

fn flatten(s: &SimState) -> Flat {
    let q = s.attitude.to_array();
    let mut x = Flat::zeros();
    x.fixed_rows_mut::<3>(0).copy_from(&s.position);
    x.fixed_rows_mut::<3>(3).copy_from(&s.velocity);
    for i in 0..4 {
        x[6 + i] = q[i];
    }
    x.fixed_rows_mut::<3>(10).copy_from(&s.angular_rate);
    x
}

fn unflatten(x: &Flat) -> SimState {
    SimState {
        position: x.fixed_rows::<3>(0).into(),
        velocity: x.fixed_rows::<3>(3).into(),
        attitude: UnitQuaternion::from_array([x[6], x[7], x[8], x[9]]),
        angular_rate: x.fixed_rows::<3>(10).into(),
    }
}

fn flat_derivative(x: &Flat, n: &RotorSpeeds, wrench: &Wrench, params: &VehicleParams) -> Flat {
    let s = unflatten(x);
    let (p_dot, v_dot, w_dot) = derivatives(&s, n, wrench, params);
    // Unnormalized quaternion rate from the raw components.
    let qv = Vector3::new(x[6], x[7], x[8]);
    let qs = x[9];
    let w = s.angular_rate;
    let qv_dot = (w * qs + qv.cross(&w)) * 0.5;
    let qs_dot = -0.5 * qv.dot(&w);
    let mut d = Flat::zeros();
    d.fixed_rows_mut::<3>(0).copy_from(&p_dot);
    d.fixed_rows_mut::<3>(3).copy_from(&v_dot);
    d.fixed_rows_mut::<3>(6).copy_from(&qv_dot);
    d[9] = qs_dot;
    d.fixed_rows_mut::<3>(10).copy_from(&w_dot);
    d
}

fn rk4_substep(s: &SimState, n: &RotorSpeeds, wrench: &Wrench, params: &VehicleParams, h: f64) -> SimState {
    let x = flatten(s);
    let k1 = flat_derivative(&x, n, wrench, params);
    let k2 = flat_derivative(&(x + k1 * (h / 2.0)), n, wrench, params);
    let k3 = flat_derivative(&(x + k2 * (h / 2.0)), n, wrench, params);
    let k4 = flat_derivative(&(x + k3 * h), n, wrench, params);
    unflatten(&(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)))
}

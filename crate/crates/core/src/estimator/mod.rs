//! Unscented Kalman filter estimating the external force (inertial frame) and
//! yaw torque (body z) together with the rigid-body state.
//!
//! The filter state is the 16-vector `[p, v, e, omega, F_ext, tau_ext]`
//! where `e` is an MRP attitude error with respect to a reference quaternion
//! (`q = q_ref * dq(e)`). Prediction propagates 33 sigma points through the
//! process model; the update is a linear Kalman update with `H = [I_12 0]`
//! and a Joseph-form covariance. After each update the attitude error is
//! folded into the reference quaternion and reset to zero.

pub mod unscented;

use std::ops::SubAssign;

use nalgebra::{SMatrix, SVector, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, RotorSpeeds, SimState, VehicleParams, Wrench};
use crate::math::{MathError, Mrp, UnitQuaternion, DEFAULT_MRP_A};
use unscented::{psd_cholesky, symmetrize, weighted_moments, UtWeights};

pub const STATE_DIM: usize = 16;
pub const MEAS_DIM: usize = 12;
pub const SIGMA_COUNT: usize = 2 * STATE_DIM + 1;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type Covariance = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type MeasVector = SVector<f64, MEAS_DIM>;
pub type MeasCovariance = SMatrix<f64, MEAS_DIM, MEAS_DIM>;

/// Offsets of each block in the state vector.
pub mod idx {
    pub const POSITION: usize = 0;
    pub const VELOCITY: usize = 3;
    pub const ATTITUDE: usize = 6;
    pub const RATE: usize = 9;
    pub const FORCE: usize = 12;
    pub const TORQUE: usize = 15;
}

/// Jitter added to the covariance when the first factorization fails.
const CHOLESKY_JITTER: f64 = 1e-9;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("covariance is not symmetric positive semidefinite (min eigenvalue {min_eigenvalue:e}, asymmetry {asymmetry:e})")]
    NonPsdCovariance { min_eigenvalue: f64, asymmetry: f64 },
    #[error("Cholesky factorization of the state covariance failed after jitter")]
    CholeskyFailure,
    #[error("innovation covariance is singular; check the measurement noise")]
    SingularInnovation,
    #[error("invalid filter parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Math(#[from] MathError),
}

/// Per-step process noise variances (diagonal of Q) by block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessNoise {
    /// m^2
    pub position: f64,
    /// (m/s)^2
    pub velocity: f64,
    /// MRP^2
    pub attitude: f64,
    /// (rad/s)^2
    pub angular_rate: f64,
    /// N^2, per axis
    pub force: f64,
    /// (N m)^2
    pub torque: f64,
}

impl Default for ProcessNoise {
    fn default() -> Self {
        Self {
            position: 1e-6,
            velocity: 1e-4,
            attitude: 1e-6,
            angular_rate: 1e-4,
            force: 0.25,
            torque: 0.01,
        }
    }
}

impl ProcessNoise {
    pub fn diagonal(&self) -> StateVector {
        block_diagonal(
            self.position,
            self.velocity,
            self.attitude,
            self.angular_rate,
            self.force,
            self.torque,
        )
    }
}

/// Initial covariance by block (variances).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialCovariance {
    pub position: f64,
    pub velocity: f64,
    pub attitude: f64,
    pub angular_rate: f64,
    pub force: f64,
    pub torque: f64,
}

impl Default for InitialCovariance {
    fn default() -> Self {
        Self {
            position: 2.5e-5,
            velocity: 4e-4,
            attitude: 1e-4,
            angular_rate: 2.5e-5,
            force: 1.0,
            torque: 0.01,
        }
    }
}

impl InitialCovariance {
    pub fn matrix(&self) -> Covariance {
        Covariance::from_diagonal(&block_diagonal(
            self.position,
            self.velocity,
            self.attitude,
            self.angular_rate,
            self.force,
            self.torque,
        ))
    }
}

fn block_diagonal(p: f64, v: f64, e: f64, w: f64, f: f64, t: f64) -> StateVector {
    let mut d = StateVector::zeros();
    for i in 0..3 {
        d[idx::POSITION + i] = p;
        d[idx::VELOCITY + i] = v;
        d[idx::ATTITUDE + i] = e;
        d[idx::RATE + i] = w;
        d[idx::FORCE + i] = f;
    }
    d[idx::TORQUE] = t;
    d
}

/// Measurement standard deviations; R is diagonal with their squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementNoise {
    /// m
    pub position: f64,
    /// m/s
    pub velocity: f64,
    /// MRP units (about rad for small errors with a = 1)
    pub attitude: f64,
    /// rad/s
    pub angular_rate: f64,
}

impl Default for MeasurementNoise {
    fn default() -> Self {
        Self {
            position: 0.005,
            velocity: 0.02,
            attitude: 0.01,
            angular_rate: 0.005,
        }
    }
}

impl MeasurementNoise {
    pub fn covariance(&self) -> MeasCovariance {
        let mut d = MeasVector::zeros();
        for i in 0..3 {
            d[i] = self.position.powi(2);
            d[3 + i] = self.velocity.powi(2);
            d[6 + i] = self.attitude.powi(2);
            d[9 + i] = self.angular_rate.powi(2);
        }
        MeasCovariance::from_diagonal(&d)
    }
}

/// How the external wrench evolves between samples.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecayModel {
    /// Constant apart from process noise.
    #[default]
    RandomWalk,
    /// Multiplied by `1 - ts / tau` each step; `tau` in seconds.
    Exponential { tau: f64 },
}

/// Choice of predicted mean attitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttitudeMean {
    /// The propagated central sigma point.
    #[default]
    CentralSigma,
    /// Iterated weighted mean on the manifold.
    Manifold,
}

/// Which attitude the measured rotation error is taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttitudeRef {
    /// Posterior attitude of the previous update.
    #[default]
    Posterior,
    /// Predicted attitude of the current cycle.
    Prior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    pub process_noise: ProcessNoise,
    pub measurement_noise: MeasurementNoise,
    pub initial_covariance: InitialCovariance,
    /// MRP parameter in [0, 1].
    pub mrp_a: f64,
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub decay: DecayModel,
    pub attitude_mean: AttitudeMean,
    pub attitude_ref: AttitudeRef,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            process_noise: ProcessNoise::default(),
            measurement_noise: MeasurementNoise::default(),
            initial_covariance: InitialCovariance::default(),
            mrp_a: DEFAULT_MRP_A,
            alpha: 0.1,
            beta: 2.0,
            kappa: 0.0,
            decay: DecayModel::RandomWalk,
            attitude_mean: AttitudeMean::CentralSigma,
            attitude_ref: AttitudeRef::Posterior,
        }
    }
}

impl FilterParams {
    pub fn validate(&self, ts: f64) -> Result<(), EstimatorError> {
        let bad = |m: String| Err(EstimatorError::InvalidParams(m));
        if !(0.0..=1.0).contains(&self.mrp_a) {
            return bad(format!("mrp_a = {} outside [0, 1]", self.mrp_a));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha = {} must be > 0", self.alpha));
        }
        let n = STATE_DIM as f64;
        if self.alpha * self.alpha * (n + self.kappa) <= 0.0 {
            return bad("alpha^2 (n + kappa) must be > 0".into());
        }
        let q = self.process_noise.diagonal();
        if q.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return bad("process noise variances must be > 0".into());
        }
        let r = self.measurement_noise;
        if [r.position, r.velocity, r.attitude, r.angular_rate]
            .iter()
            .any(|x| !(x.is_finite() && *x > 0.0))
        {
            return bad("measurement noise deviations must be > 0".into());
        }
        if let DecayModel::Exponential { tau } = self.decay {
            if !(tau > ts) {
                return bad(format!("decay tau = {tau} must exceed ts = {ts}"));
            }
        }
        Ok(())
    }
}

/// Measured pose and twist.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Measurement {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub attitude: UnitQuaternion,
    pub angular_rate: Vector3<f64>,
}

impl Measurement {
    pub fn exact(state: &SimState) -> Self {
        Self {
            position: state.position,
            velocity: state.velocity,
            attitude: state.attitude,
            angular_rate: state.angular_rate,
        }
    }

    pub fn as_state(&self) -> SimState {
        SimState {
            position: self.position,
            velocity: self.velocity,
            attitude: self.attitude,
            angular_rate: self.angular_rate,
        }
    }
}

/// Discrete process model `s_{k+1} = f_k(s_k, F_ext, tau_ext)`.
pub trait ProcessModel {
    fn ts(&self) -> f64;
    fn propagate(&self, state: &SimState, wrench: &Wrench, rotors: &RotorSpeeds) -> SimState;
}

/// The hexacopter Euler model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HexacopterModel {
    pub params: VehicleParams,
}

impl HexacopterModel {
    pub fn new(params: VehicleParams) -> Self {
        Self { params }
    }
}

impl ProcessModel for HexacopterModel {
    fn ts(&self) -> f64 {
        self.params.ts
    }

    fn propagate(&self, state: &SimState, wrench: &Wrench, rotors: &RotorSpeeds) -> SimState {
        dynamics::step(state, rotors, wrench, &self.params)
    }
}

/// Mean, attitude reference and covariance of the filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub mean: StateVector,
    /// Attitude that the error block of `mean` is relative to.
    pub attitude_ref: UnitQuaternion,
    pub covariance: Covariance,
    /// Attitude after the most recent update.
    pub last_posterior_attitude: UnitQuaternion,
}

impl FilterState {
    pub fn attitude_error(&self) -> Vector3<f64> {
        self.mean.fixed_rows::<3>(idx::ATTITUDE).into()
    }

    pub fn wrench(&self) -> Wrench {
        Wrench::new(
            self.mean.fixed_rows::<3>(idx::FORCE).into(),
            self.mean[idx::TORQUE],
        )
    }
}

/// 33 sigma points: state vectors plus the full attitude each one encodes.
#[derive(Debug, Clone)]
pub struct SigmaPoints {
    pub vectors: Vec<StateVector>,
    pub attitudes: Vec<UnitQuaternion>,
}

/// External wrench estimator.
#[derive(Debug, Clone)]
pub struct WrenchEstimator<M = HexacopterModel> {
    params: FilterParams,
    model: M,
    weights: UtWeights,
    state: FilterState,
}

impl WrenchEstimator<HexacopterModel> {
    /// Estimator driven by the hexacopter model, initial covariance taken
    /// from `params.initial_covariance`.
    pub fn hexacopter(
        params: FilterParams,
        vehicle: VehicleParams,
        initial: &SimState,
    ) -> Result<Self, EstimatorError> {
        let p0 = params.initial_covariance.matrix();
        Self::new(params, HexacopterModel::new(vehicle), initial, p0)
    }
}

impl<M: ProcessModel> WrenchEstimator<M> {
    /// Starts with zero wrench and zero attitude error at `initial`.
    pub fn new(
        params: FilterParams,
        model: M,
        initial: &SimState,
        p0: Covariance,
    ) -> Result<Self, EstimatorError> {
        params.validate(model.ts())?;
        check_psd(&p0)?;
        let mut mean = StateVector::zeros();
        mean.fixed_rows_mut::<3>(idx::POSITION).copy_from(&initial.position);
        mean.fixed_rows_mut::<3>(idx::VELOCITY).copy_from(&initial.velocity);
        mean.fixed_rows_mut::<3>(idx::RATE).copy_from(&initial.angular_rate);
        let weights = UtWeights::new(STATE_DIM, params.alpha, params.beta, params.kappa);
        Ok(Self {
            params,
            model,
            weights,
            state: FilterState {
                mean,
                attitude_ref: initial.attitude,
                covariance: symmetrize(&p0),
                last_posterior_attitude: initial.attitude,
            },
        })
    }

    pub fn params(&self) -> &FilterParams {
        &self.params
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn state(&self) -> &FilterState {
        &self.state
    }

    pub fn weights(&self) -> &UtWeights {
        &self.weights
    }

    /// Latest external wrench estimate.
    pub fn estimate_wrench(&self) -> Wrench {
        self.state.wrench()
    }

    /// Full attitude estimate `q_ref * dq(e)`.
    pub fn attitude(&self) -> UnitQuaternion {
        self.state.attitude_ref * Mrp(self.state.attitude_error()).to_quat(self.params.mrp_a)
    }

    /// Estimated rigid-body state.
    pub fn sim_state(&self) -> SimState {
        let m = &self.state.mean;
        SimState {
            position: m.fixed_rows::<3>(idx::POSITION).into(),
            velocity: m.fixed_rows::<3>(idx::VELOCITY).into(),
            attitude: self.attitude(),
            angular_rate: m.fixed_rows::<3>(idx::RATE).into(),
        }
    }

    pub fn covariance_diagonal(&self) -> StateVector {
        self.state.covariance.diagonal()
    }

    /// Symmetric sigma points around the current mean.
    pub fn sigma_points(&self) -> Result<SigmaPoints, EstimatorError> {
        let p = &self.state.covariance;
        let l = match psd_cholesky(p) {
            Some(l) => l,
            None => psd_cholesky(&(p + Covariance::identity() * CHOLESKY_JITTER))
                .ok_or(EstimatorError::CholeskyFailure)?,
        };
        let x = self.state.mean;
        let mut vectors = Vec::with_capacity(SIGMA_COUNT);
        vectors.push(x);
        for j in 0..STATE_DIM {
            vectors.push(x + l.column(j) * self.weights.gamma);
        }
        for j in 0..STATE_DIM {
            vectors.push(x - l.column(j) * self.weights.gamma);
        }
        let a = self.params.mrp_a;
        let attitudes = vectors
            .iter()
            .map(|v| {
                let e: Vector3<f64> = v.fixed_rows::<3>(idx::ATTITUDE).into();
                self.state.attitude_ref * Mrp(e).to_quat(a)
            })
            .collect();
        Ok(SigmaPoints { vectors, attitudes })
    }

    /// Propagates the sigma points through the process model with the
    /// rotor speeds applied over the coming sample.
    pub fn predict(&mut self, rotors: &RotorSpeeds) -> Result<(), EstimatorError> {
        let sigma = self.sigma_points()?;
        let decay = match self.params.decay {
            DecayModel::RandomWalk => 1.0,
            DecayModel::Exponential { tau } => 1.0 - self.model.ts() / tau,
        };
        let mut propagated = Vec::with_capacity(SIGMA_COUNT);
        let mut attitudes = Vec::with_capacity(SIGMA_COUNT);
        for (x, q) in sigma.vectors.iter().zip(&sigma.attitudes) {
            let s = SimState {
                position: x.fixed_rows::<3>(idx::POSITION).into(),
                velocity: x.fixed_rows::<3>(idx::VELOCITY).into(),
                attitude: *q,
                angular_rate: x.fixed_rows::<3>(idx::RATE).into(),
            };
            let w = Wrench::new(x.fixed_rows::<3>(idx::FORCE).into(), x[idx::TORQUE]);
            let next = self.model.propagate(&s, &w, rotors);
            let mut y = StateVector::zeros();
            y.fixed_rows_mut::<3>(idx::POSITION).copy_from(&next.position);
            y.fixed_rows_mut::<3>(idx::VELOCITY).copy_from(&next.velocity);
            y.fixed_rows_mut::<3>(idx::RATE).copy_from(&next.angular_rate);
            y.fixed_rows_mut::<3>(idx::FORCE).copy_from(&(w.force * decay));
            y[idx::TORQUE] = w.torque * decay;
            propagated.push(y);
            attitudes.push(next.attitude);
        }

        let a = self.params.mrp_a;
        let mean_attitude = match self.params.attitude_mean {
            AttitudeMean::CentralSigma => attitudes[0],
            AttitudeMean::Manifold => self.manifold_mean(&attitudes)?,
        };
        let inv = mean_attitude.inverse();
        for (y, q) in propagated.iter_mut().zip(&attitudes) {
            let e = Mrp::from_quat(&(inv * *q), a)?;
            y.fixed_rows_mut::<3>(idx::ATTITUDE).copy_from(e.vector());
        }

        let (mean, cov) = weighted_moments(&propagated, &self.weights);
        let q = Covariance::from_diagonal(&self.params.process_noise.diagonal());
        self.state.mean = mean;
        self.state.attitude_ref = mean_attitude;
        self.state.covariance = symmetrize(&(cov + q));
        Ok(())
    }

    fn manifold_mean(&self, attitudes: &[UnitQuaternion]) -> Result<UnitQuaternion, EstimatorError> {
        let a = self.params.mrp_a;
        let mut mean = attitudes[0];
        for _ in 0..20 {
            let inv = mean.inverse();
            let mut avg = Vector3::zeros();
            for (i, q) in attitudes.iter().enumerate() {
                avg += Mrp::from_quat(&(inv * *q), a)?.0 * self.weights.mean_weight(i);
            }
            mean = mean * Mrp(avg).to_quat(a);
            if avg.norm() < 1e-14 {
                break;
            }
        }
        Ok(mean)
    }

    /// Linear Kalman update with the measured pose and twist.
    pub fn update(&mut self, z: &Measurement) -> Result<(), EstimatorError> {
        let a = self.params.mrp_a;
        let reference = match self.params.attitude_ref {
            AttitudeRef::Posterior => self.state.last_posterior_attitude,
            AttitudeRef::Prior => self.state.attitude_ref,
        };
        let e_m = Mrp::from_quat(&(reference.inverse() * z.attitude), a)?;
        let mut zv = MeasVector::zeros();
        zv.fixed_rows_mut::<3>(0).copy_from(&z.position);
        zv.fixed_rows_mut::<3>(3).copy_from(&z.velocity);
        zv.fixed_rows_mut::<3>(6).copy_from(e_m.vector());
        zv.fixed_rows_mut::<3>(9).copy_from(&z.angular_rate);

        let p = self.state.covariance;
        let r = self.params.measurement_noise.covariance();
        let s = p.fixed_view::<MEAS_DIM, MEAS_DIM>(0, 0) + r;
        let s_chol = s.cholesky().ok_or(EstimatorError::SingularInnovation)?;
        // K = P H^T S^-1, with P H^T the first 12 columns of P.
        let pht: SMatrix<f64, STATE_DIM, MEAS_DIM> = p.fixed_view::<STATE_DIM, MEAS_DIM>(0, 0).into();
        let gain: SMatrix<f64, STATE_DIM, MEAS_DIM> = s_chol.solve(&pht.transpose()).transpose();

        let innovation = zv - self.state.mean.fixed_rows::<MEAS_DIM>(0);
        let mut mean = self.state.mean + gain * innovation;

        let mut ikh = Covariance::identity();
        ikh.fixed_view_mut::<STATE_DIM, MEAS_DIM>(0, 0).sub_assign(&gain);
        let cov = ikh * p * ikh.transpose() + gain * r * gain.transpose();

        let e_post: Vector3<f64> = mean.fixed_rows::<3>(idx::ATTITUDE).into();
        let attitude = self.state.attitude_ref * Mrp(e_post).to_quat(a);
        mean.fixed_rows_mut::<3>(idx::ATTITUDE).fill(0.0);

        self.state = FilterState {
            mean,
            attitude_ref: attitude,
            covariance: symmetrize(&cov),
            last_posterior_attitude: attitude,
        };
        Ok(())
    }

    /// Overwrites the filter state; used by tests and replay tools.
    pub fn set_state(&mut self, state: FilterState) {
        self.state = state;
    }
}

/// Checks that `p` is symmetric and positive semidefinite.
pub fn check_psd(p: &Covariance) -> Result<(), EstimatorError> {
    let asymmetry = (p - p.transpose()).abs().max();
    let min_eigenvalue = SymmetricEigen::new(symmetrize(p)).eigenvalues.min();
    let finite = p.iter().all(|x| x.is_finite());
    if !finite || asymmetry > 1e-10 || min_eigenvalue < -1e-10 {
        return Err(EstimatorError::NonPsdCovariance {
            min_eigenvalue,
            asymmetry,
        });
    }
    Ok(())
}

//! Scenario description. Every section has defaults so configs only need to
//! name what they change; unknown keys are rejected.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::admittance::{AdmittanceGains, AdmittanceSign, FsmConfig};
use crate::dynamics::VehicleParams;
use crate::estimator::FilterParams;

use super::controller::ControllerGains;
use super::rope::RopeModel;
use super::trajectory::{ForceKey, Waypoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    WallCollision,
    Leash,
    CoopTransport,
    /// Single vehicle tracking its trajectory under an optional scripted
    /// force, without admittance; produces logs for offline replay.
    #[default]
    ReplaySynth,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::WallCollision => "wall_collision",
            ScenarioKind::Leash => "leash",
            ScenarioKind::CoopTransport => "coop_transport",
            ScenarioKind::ReplaySynth => "replay_synth",
        }
    }
}

/// Ground-truth integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthIntegrator {
    /// The filter's Euler step at `ts / substeps`.
    #[default]
    Euler,
    /// RK4 at `ts / substeps`.
    Rk4,
}

/// Sensor noise standard deviations. Zero gives exact measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorNoise {
    /// m
    pub position: f64,
    /// m/s
    pub velocity: f64,
    /// rad, per axis of a body-frame rotation vector
    pub attitude: f64,
    /// rad/s
    pub angular_rate: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self {
            position: 0.005,
            velocity: 0.02,
            attitude: 0.01,
            angular_rate: 0.005,
        }
    }
}

impl SensorNoise {
    pub fn zero() -> Self {
        Self {
            position: 0.0,
            velocity: 0.0,
            attitude: 0.0,
            angular_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoverConfig {
    /// m/s
    pub max_speed: f64,
    /// rad/s
    pub max_rate: f64,
    /// s
    pub hold_time: f64,
}

impl Default for HoverConfig {
    fn default() -> Self {
        Self {
            max_speed: 0.05,
            max_rate: 0.05,
            hold_time: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmittanceConfig {
    pub gains: AdmittanceGains,
    pub fsm: FsmConfig,
    pub sign: AdmittanceSign,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pose {
    /// m
    pub position: [f64; 3],
    /// rad
    pub yaw: f64,
}

impl Default for Pose {
    fn default() -> Self {
        Self {
            position: [0.0, 0.0, 1.0],
            yaw: 0.0,
        }
    }
}

impl Pose {
    pub fn position(&self) -> Vector3<f64> {
        Vector3::from(self.position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WallConfig {
    pub axis: Axis,
    /// Plane coordinate along `axis`, m.
    pub offset: f64,
    /// +1 if free space is on the positive side of the plane, -1 otherwise.
    pub normal_sign: f64,
    /// N/m
    pub stiffness: f64,
    /// N s/m
    pub damping: f64,
    /// Distance from the vehicle centre at which contact starts, m.
    pub contact_radius: f64,
    /// Estimated force magnitude that flags a collision, N.
    pub detection_threshold: f64,
    /// Safe-reference offset per newton of estimated impact force, m/N.
    pub safe_gain: f64,
    /// Frames after detection over which the peak force is tracked.
    pub peak_window: usize,
}

impl Default for WallConfig {
    fn default() -> Self {
        Self {
            axis: Axis::Y,
            offset: -1.95,
            normal_sign: 1.0,
            stiffness: 2000.0,
            damping: 50.0,
            contact_radius: 0.3,
            detection_threshold: 10.0,
            safe_gain: 0.84 / 34.5,
            peak_window: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PayloadConfig {
    /// Rod length between attachment points, m.
    pub length: f64,
    /// Total mass split equally between the two ends, kg.
    pub mass: f64,
}

impl Default for PayloadConfig {
    fn default() -> Self {
        Self {
            length: 1.2,
            mass: 0.37,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoopConfig {
    pub payload: PayloadConfig,
    pub rope: RopeModel,
    /// Slave start pose; the master starts at the top-level `initial` pose.
    pub slave_initial: Pose,
    /// Altitude the slave's admittance holds on z, m. Defaults to its
    /// starting altitude.
    pub slave_altitude: Option<f64>,
    /// Slack allowed beyond payload length plus rope rest length before the
    /// run is declared divergent, m.
    pub divergence_margin: f64,
}

impl Default for CoopConfig {
    fn default() -> Self {
        Self {
            payload: PayloadConfig::default(),
            rope: RopeModel::default(),
            slave_initial: Pose {
                position: [-1.2, 0.0, 1.5],
                yaw: 0.0,
            },
            slave_altitude: None,
            divergence_margin: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// s
    pub duration: f64,
    pub seed: u64,
    /// Ground-truth sub-steps per filter period.
    pub substeps: usize,
    pub truth_integrator: TruthIntegrator,
    pub vehicle: VehicleParams,
    pub filter: FilterParams,
    pub controller: ControllerGains,
    pub admittance: AdmittanceConfig,
    pub hover: HoverConfig,
    pub noise: SensorNoise,
    /// Start pose of the (first) vehicle.
    pub initial: Pose,
    /// Desired pose over time for the (first) vehicle; empty holds the
    /// initial pose.
    pub trajectory: Vec<Waypoint>,
    /// Scripted external force on the (first) vehicle, inertial frame.
    pub force_script: Vec<ForceKey>,
    pub wall: Option<WallConfig>,
    pub coop: Option<CoopConfig>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::ReplaySynth,
            duration: 10.0,
            seed: 0,
            substeps: 10,
            truth_integrator: TruthIntegrator::Euler,
            vehicle: VehicleParams::default(),
            filter: FilterParams::default(),
            controller: ControllerGains::default(),
            admittance: AdmittanceConfig::default(),
            hover: HoverConfig::default(),
            noise: SensorNoise::default(),
            initial: Pose::default(),
            trajectory: Vec::new(),
            force_script: Vec::new(),
            wall: None,
            coop: None,
        }
    }
}

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
#[error("invalid scenario: {0}")]
pub struct InvalidScenario(pub String);

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), InvalidScenario> {
        let bad = |m: String| Err(InvalidScenario(m));
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration = {} must be > 0", self.duration));
        }
        if self.substeps == 0 {
            return bad("substeps must be >= 1".into());
        }
        if let Err(e) = self.vehicle.validate() {
            return bad(e.to_string());
        }
        if let Err(e) = self.filter.validate(self.vehicle.ts) {
            return bad(e.to_string());
        }
        if let Err(e) = self.admittance.gains.validate(self.vehicle.ts, false) {
            return bad(e.to_string());
        }
        if let Err(e) = self.admittance.fsm.validate() {
            return bad(e.to_string());
        }
        let n = [
            self.noise.position,
            self.noise.velocity,
            self.noise.attitude,
            self.noise.angular_rate,
        ];
        if n.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return bad("noise deviations must be >= 0".into());
        }
        if self.trajectory.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return bad("trajectory times must be strictly increasing".into());
        }
        if self.force_script.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return bad("force_script times must be strictly increasing".into());
        }
        match self.kind {
            ScenarioKind::WallCollision if self.coop.is_some() => {
                return bad("wall_collision is a single-vehicle scenario".into())
            }
            ScenarioKind::CoopTransport => {
                let Some(coop) = &self.coop else {
                    return bad("coop_transport requires a [coop] section (two vehicles)".into());
                };
                if let Err(e) = coop.rope.validate() {
                    return bad(e);
                }
                if !(coop.payload.length > 0.0 && coop.payload.mass > 0.0) {
                    return bad("payload length and mass must be > 0".into());
                }
            }
            _ if self.coop.is_some() => {
                return bad(format!("[coop] is only valid for coop_transport, not {}", self.kind.name()))
            }
            _ => {}
        }
        if let Some(w) = &self.wall {
            if !(w.stiffness > 0.0 && w.damping >= 0.0 && w.normal_sign.abs() == 1.0) {
                return bad("wall needs stiffness > 0, damping >= 0, normal_sign = +-1".into());
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.vehicle.ts).round() as usize
    }
}

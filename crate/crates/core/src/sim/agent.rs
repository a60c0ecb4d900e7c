//! Per-vehicle onboard logic. An agent sees its own measurements and its
//! own configuration, nothing else.

use std::collections::VecDeque;

use nalgebra::Vector3;

use crate::admittance::{AdmittanceController, AdmittanceError, Mode, ReferencePose, Transition};
use crate::dynamics::{RotorSpeeds, SimState, VehicleParams, Wrench};
use crate::estimator::{EstimatorError, FilterParams, Measurement, StateVector, WrenchEstimator};

use super::config::{AdmittanceConfig, HoverConfig, WallConfig};
use super::controller::{ControllerGains, PoseController};
use super::trajectory::Trajectory;

/// Drives the estimator from a measurement stream: the first sample
/// initializes it, later samples run predict with the previously applied
/// rotor speeds followed by update. Shared by the closed loop and offline
/// replay so both perform the same arithmetic.
#[derive(Debug, Clone)]
pub struct EstimatorRunner {
    params: FilterParams,
    vehicle: VehicleParams,
    filter: Option<WrenchEstimator>,
}

impl EstimatorRunner {
    pub fn new(params: FilterParams, vehicle: VehicleParams) -> Self {
        Self {
            params,
            vehicle,
            filter: None,
        }
    }

    /// `applied` are the rotor speeds held since the previous sample; they
    /// are ignored on the first call.
    pub fn step(&mut self, z: &Measurement, applied: &RotorSpeeds) -> Result<&WrenchEstimator, EstimatorError> {
        match &mut self.filter {
            None => {
                self.filter = Some(WrenchEstimator::hexacopter(self.params, self.vehicle, &z.as_state())?);
            }
            Some(f) => {
                f.predict(applied)?;
                f.update(z)?;
            }
        }
        Ok(self.filter.as_ref().expect("initialized above"))
    }

    pub fn filter(&self) -> Option<&WrenchEstimator> {
        self.filter.as_ref()
    }
}

/// Estimated wrench and covariance diagonal after each sample.
pub fn replay(
    params: FilterParams,
    vehicle: VehicleParams,
    samples: impl IntoIterator<Item = (Measurement, RotorSpeeds)>,
) -> Result<Vec<(Wrench, StateVector)>, (usize, EstimatorError)> {
    let mut runner = EstimatorRunner::new(params, vehicle);
    let mut applied = RotorSpeeds::default();
    let mut out = Vec::new();
    for (k, (z, rotors)) in samples.into_iter().enumerate() {
        let f = runner.step(&z, &applied).map_err(|e| (k, e))?;
        out.push((f.estimate_wrench(), f.covariance_diagonal()));
        applied = rotors;
    }
    Ok(out)
}

/// Flags hovering once the estimated speed and body rate, averaged over
/// the last `hold_time`, are below their bounds.
#[derive(Debug, Clone)]
pub struct HoverDetector {
    cfg: HoverConfig,
    window: VecDeque<(Vector3<f64>, Vector3<f64>)>,
}

impl HoverDetector {
    pub fn new(cfg: HoverConfig) -> Self {
        Self {
            cfg,
            window: VecDeque::new(),
        }
    }

    pub fn update(&mut self, state: &SimState, ts: f64) -> bool {
        let len = ((self.cfg.hold_time / ts).round() as usize).max(1);
        self.window.push_back((state.velocity, state.angular_rate));
        while self.window.len() > len {
            self.window.pop_front();
        }
        if self.window.len() < len {
            return false;
        }
        let n = len as f64;
        let (v, w) = self
            .window
            .iter()
            .fold((Vector3::zeros(), Vector3::zeros()), |(v, w), (a, b)| (v + a, w + b));
        (v / n).norm() < self.cfg.max_speed && (w / n).norm() < self.cfg.max_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionConfig {
    /// N
    pub threshold: f64,
    /// m/N
    pub safe_gain: f64,
    /// Frames over which the peak estimated force is tracked.
    pub peak_window: usize,
}

impl From<&WallConfig> for CollisionConfig {
    fn from(w: &WallConfig) -> Self {
        Self {
            threshold: w.detection_threshold,
            safe_gain: w.safe_gain,
            peak_window: w.peak_window,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collision {
    /// Detection time, s.
    pub t: f64,
    /// Estimated position at detection, m.
    pub impact_point: Vector3<f64>,
    /// Unit direction of the estimated force at detection.
    pub direction: Vector3<f64>,
    /// Largest estimated force magnitude seen in the window, N.
    pub peak_force: f64,
    frames: usize,
}

impl Collision {
    pub fn safe_reference(&self, gain: f64, yaw: f64) -> ReferencePose {
        ReferencePose::new(self.impact_point + self.direction * (gain * self.peak_force), yaw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CollisionUpdate {
    Detected(Collision),
    /// Peak raised within the window; the safe reference moved.
    Refined(Collision),
}

#[derive(Debug, Clone)]
pub struct CollisionMonitor {
    cfg: CollisionConfig,
    hit: Option<Collision>,
}

impl CollisionMonitor {
    pub fn new(cfg: CollisionConfig) -> Self {
        Self { cfg, hit: None }
    }

    pub fn collision(&self) -> Option<&Collision> {
        self.hit.as_ref()
    }

    pub fn update(&mut self, t: f64, estimate: &Wrench, position: &Vector3<f64>) -> Option<CollisionUpdate> {
        let mag = estimate.force.norm();
        match &mut self.hit {
            None if mag > self.cfg.threshold => {
                let c = Collision {
                    t,
                    impact_point: *position,
                    direction: estimate.force / mag,
                    peak_force: mag,
                    frames: 0,
                };
                self.hit = Some(c);
                Some(CollisionUpdate::Detected(c))
            }
            Some(c) if c.frames < self.cfg.peak_window => {
                c.frames += 1;
                if mag > c.peak_force {
                    c.peak_force = mag;
                    Some(CollisionUpdate::Refined(*c))
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

/// What an agent did this sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentOutput {
    pub rotors: RotorSpeeds,
    pub estimate: Option<Wrench>,
    pub reference: ReferencePose,
    pub mode: Option<Mode>,
    pub transition: Option<Transition>,
    pub collision: Option<CollisionUpdate>,
    pub hovering: bool,
}

#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub vehicle: VehicleParams,
    pub filter: FilterParams,
    pub controller: ControllerGains,
    pub hover: HoverConfig,
    pub admittance: Option<AdmittanceConfig>,
    pub collision: Option<CollisionConfig>,
    pub trajectory: Trajectory,
}

/// Estimator, optional admittance and collision response, pose tracker.
/// This is the follower in cooperative transport; the only input it takes
/// at run time is its own measurement.
#[derive(Debug, Clone)]
pub struct AdmittanceAgent {
    ts: f64,
    estimator: EstimatorRunner,
    hover: HoverDetector,
    admittance: Option<AdmittanceController>,
    collision: Option<(CollisionConfig, CollisionMonitor)>,
    trajectory: Trajectory,
    controller: PoseController,
    applied: RotorSpeeds,
}

impl AdmittanceAgent {
    pub fn new(cfg: AgentConfig) -> Result<Self, AdmittanceError> {
        let ts = cfg.vehicle.ts;
        let admittance = cfg
            .admittance
            .map(|a| AdmittanceController::new(a.gains, a.fsm, a.sign, ts, cfg.trajectory.at(0.0)))
            .transpose()?;
        Ok(Self {
            ts,
            estimator: EstimatorRunner::new(cfg.filter, cfg.vehicle),
            hover: HoverDetector::new(cfg.hover),
            admittance,
            collision: cfg.collision.map(|c| (c, CollisionMonitor::new(c))),
            trajectory: cfg.trajectory,
            controller: PoseController::new(cfg.controller, cfg.vehicle),
            applied: RotorSpeeds::hover(&cfg.vehicle),
        })
    }

    pub fn admittance(&self) -> Option<&AdmittanceController> {
        self.admittance.as_ref()
    }

    pub fn estimator(&self) -> Option<&WrenchEstimator> {
        self.estimator.filter()
    }

    pub fn tick(&mut self, t: f64, z: &Measurement) -> Result<AgentOutput, EstimatorError> {
        let filter = self.estimator.step(z, &self.applied)?;
        let wrench = filter.estimate_wrench();
        let state = filter.sim_state();
        let hovering = self.hover.update(&state, self.ts);
        let desired = self.trajectory.at(t);

        let (mut reference, mode, transition) = match &mut self.admittance {
            Some(adm) => {
                let (out, tr) = adm.tick(&desired, &wrench, hovering);
                let r = match adm.mode() {
                    Mode::Engaged | Mode::Landed => out,
                    _ => desired,
                };
                (r, Some(adm.mode()), tr)
            }
            None => (desired, None, None),
        };

        let mut collision = None;
        if let Some((cfg, monitor)) = &mut self.collision {
            collision = monitor.update(t, &wrench, &state.position);
            if let Some(c) = monitor.collision() {
                reference = c.safe_reference(cfg.safe_gain, desired.yaw);
            }
        }

        let rotors = self.controller.compute(&state, &reference);
        self.applied = rotors;
        Ok(AgentOutput {
            rotors,
            estimate: Some(wrench),
            reference,
            mode,
            transition,
            collision,
            hovering,
        })
    }
}

/// Trajectory follower without estimator, controlled from its own
/// measurement. The master in cooperative transport.
#[derive(Debug, Clone)]
pub struct LeaderAgent {
    trajectory: Trajectory,
    controller: PoseController,
}

impl LeaderAgent {
    pub fn new(vehicle: VehicleParams, gains: ControllerGains, trajectory: Trajectory) -> Self {
        Self {
            trajectory,
            controller: PoseController::new(gains, vehicle),
        }
    }

    pub fn tick(&mut self, t: f64, z: &Measurement) -> AgentOutput {
        let reference = self.trajectory.at(t);
        let rotors = self.controller.compute(&z.as_state(), &reference);
        AgentOutput {
            rotors,
            estimate: None,
            reference,
            mode: None,
            transition: None,
            collision: None,
            hovering: false,
        }
    }
}

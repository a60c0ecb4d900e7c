//! In-memory simulation record.

use std::fmt;

use nalgebra::Vector3;

use crate::admittance::{Mode, ReferencePose, Trigger};
use crate::dynamics::{RotorSpeeds, SimState, Wrench};
use crate::estimator::Measurement;

use super::config::ScenarioKind;

/// One vehicle at one sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub truth: SimState,
    pub measurement: Measurement,
    /// Speeds commanded at `t` and held until the next sample.
    pub rotors: RotorSpeeds,
    pub estimate: Option<Wrench>,
    /// External wrench acting on the vehicle at `t`.
    pub true_wrench: Wrench,
    pub reference: ReferencePose,
    pub mode: Option<Mode>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VehicleLog {
    pub frames: Vec<Frame>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    ModeChange { from: Mode, to: Mode, trigger: Trigger },
    /// Ground truth touched the wall.
    Contact,
    /// Estimated force crossed the threshold. `latency` is measured from
    /// the most recent contact, if any.
    CollisionDetected { force: f64, latency: Option<f64> },
    SafeReference { position: Vector3<f64>, peak_force: f64 },
    Divergence { separation: f64 },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::ModeChange { .. } => "mode_change",
            EventKind::Contact => "contact",
            EventKind::CollisionDetected { .. } => "collision_detected",
            EventKind::SafeReference { .. } => "safe_reference",
            EventKind::Divergence { .. } => "divergence",
        }
    }
}

impl fmt::Display for EventKind {
    /// `key=value` pairs separated by spaces.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::ModeChange { from, to, trigger } => {
                write!(f, "from={from} to={to} trigger={}", trigger.name())
            }
            EventKind::Contact => Ok(()),
            EventKind::CollisionDetected { force, latency } => {
                write!(f, "force={force:.16e}")?;
                if let Some(l) = latency {
                    write!(f, " latency={l:.16e}")?;
                }
                Ok(())
            }
            EventKind::SafeReference { position: p, peak_force } => {
                write!(f, "x={:.16e} y={:.16e} z={:.16e} peak_force={peak_force:.16e}", p.x, p.y, p.z)
            }
            EventKind::Divergence { separation } => write!(f, "separation={separation:.16e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub vehicle: usize,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub kind: ScenarioKind,
    pub ts: f64,
    pub vehicles: Vec<VehicleLog>,
    pub events: Vec<Event>,
}

impl SimLog {
    pub fn events_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Event> + 'a {
        self.events.iter().filter(move |e| e.kind.name() == name)
    }

    /// Latency of the first collision detection, s.
    pub fn collision_latency(&self) -> Option<f64> {
        self.events.iter().find_map(|e| match e.kind {
            EventKind::CollisionDetected { latency, .. } => latency,
            _ => None,
        })
    }
}

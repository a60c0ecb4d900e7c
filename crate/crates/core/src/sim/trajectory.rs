//! Timed waypoints and scripted force profiles, both piecewise linear and
//! held constant outside their time span.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::admittance::ReferencePose;
use crate::dynamics::Wrench;
use crate::math::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    /// s
    pub t: f64,
    /// m
    pub position: [f64; 3],
    /// rad
    #[serde(default)]
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceKey {
    /// s
    pub t: f64,
    /// Inertial force, N.
    #[serde(default)]
    pub force: [f64; 3],
    /// Body-z torque, N m.
    #[serde(default)]
    pub torque: f64,
}

/// Index `i` and fraction `s` such that `t` lies between keys `i` and `i+1`.
fn bracket(times: impl Iterator<Item = f64>, t: f64) -> Option<(usize, f64)> {
    let ts: Vec<f64> = times.collect();
    if ts.is_empty() {
        return None;
    }
    if t <= ts[0] {
        return Some((0, 0.0));
    }
    for i in 0..ts.len() - 1 {
        if t < ts[i + 1] {
            return Some((i, (t - ts[i]) / (ts[i + 1] - ts[i])));
        }
    }
    Some((ts.len() - 1, 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    start: ReferencePose,
    points: Vec<Waypoint>,
}

impl Trajectory {
    /// Holds `start` until the first waypoint, then interpolates.
    pub fn new(start: ReferencePose, points: Vec<Waypoint>) -> Self {
        Self { start, points }
    }

    pub fn hold(pose: ReferencePose) -> Self {
        Self::new(pose, Vec::new())
    }

    pub fn at(&self, t: f64) -> ReferencePose {
        let Some((i, s)) = bracket(self.points.iter().map(|w| w.t), t) else {
            return self.start;
        };
        if i == 0 && t < self.points[0].t {
            return self.start;
        }
        let a = &self.points[i];
        let Some(b) = self.points.get(i + 1).filter(|_| s > 0.0) else {
            return ReferencePose::new(Vector3::from(a.position), a.yaw);
        };
        let pa = Vector3::from(a.position);
        let pb = Vector3::from(b.position);
        let dyaw = wrap_angle(b.yaw - a.yaw);
        ReferencePose::new(pa + (pb - pa) * s, a.yaw + dyaw * s)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForceScript {
    keys: Vec<ForceKey>,
}

impl ForceScript {
    pub fn new(keys: Vec<ForceKey>) -> Self {
        Self { keys }
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn at(&self, t: f64) -> Wrench {
        let Some((i, s)) = bracket(self.keys.iter().map(|k| k.t), t) else {
            return Wrench::zero();
        };
        let a = &self.keys[i];
        let wa = Wrench::new(Vector3::from(a.force), a.torque);
        match self.keys.get(i + 1) {
            Some(b) if s > 0.0 => {
                let wb = Wrench::new(Vector3::from(b.force), b.torque);
                Wrench::new(
                    wa.force + (wb.force - wa.force) * s,
                    wa.torque + (wb.torque - wa.torque) * s,
                )
            }
            _ => wa,
        }
    }
}

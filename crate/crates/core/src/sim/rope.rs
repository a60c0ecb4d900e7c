//! Massless spring-damper rope between two points.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RopeModel {
    /// m
    pub rest_length: f64,
    /// N/m
    pub stiffness: f64,
    /// N s/m
    pub damping: f64,
    /// Slack ropes do not push and tension never goes negative.
    pub unilateral: bool,
}

impl Default for RopeModel {
    fn default() -> Self {
        Self {
            rest_length: 0.5,
            stiffness: 300.0,
            damping: 3.0,
            unilateral: true,
        }
    }
}

impl RopeModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rest_length >= 0.0 && self.stiffness > 0.0 && self.damping >= 0.0) {
            return Err("rope needs rest_length >= 0, stiffness > 0, damping >= 0".into());
        }
        Ok(())
    }
}

/// Forces on the two endpoints `(on_a, on_b)`; `on_b` is exactly `-on_a`.
pub fn rope_force(
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    va: &Vector3<f64>,
    vb: &Vector3<f64>,
    rope: &RopeModel,
) -> (Vector3<f64>, Vector3<f64>) {
    let d = b - a;
    let len = d.norm();
    if len == 0.0 || (rope.unilateral && len <= rope.rest_length) {
        return (Vector3::zeros(), Vector3::zeros());
    }
    let u = d / len;
    let stretch_rate = (vb - va).dot(&u);
    let mut tension = rope.stiffness * (len - rope.rest_length) + rope.damping * stretch_rate;
    if rope.unilateral {
        tension = tension.max(0.0);
    }
    let on_a = u * tension;
    (on_a, -on_a)
}

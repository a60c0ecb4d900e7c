//! Rigid massless rod with a point mass at each end.

use nalgebra::Vector3;

use crate::math::UnitQuaternion;

use super::config::PayloadConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payload {
    pub length: f64,
    pub mass: f64,
    /// Centre of mass, m.
    pub center: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Unit vector from end `b` to end `a`.
    pub axis: Vector3<f64>,
    /// Rod angular rate, always perpendicular to `axis`, rad/s.
    pub rate: Vector3<f64>,
}

impl Payload {
    pub fn at_rest(cfg: &PayloadConfig, end_a: Vector3<f64>, end_b: Vector3<f64>) -> Self {
        let d = end_a - end_b;
        Self {
            length: cfg.length,
            mass: cfg.mass,
            center: (end_a + end_b) * 0.5,
            velocity: Vector3::zeros(),
            axis: d.normalize(),
            rate: Vector3::zeros(),
        }
    }

    pub fn end_a(&self) -> Vector3<f64> {
        self.center + self.axis * (0.5 * self.length)
    }

    pub fn end_b(&self) -> Vector3<f64> {
        self.center - self.axis * (0.5 * self.length)
    }

    fn tip_velocity(&self, sign: f64) -> Vector3<f64> {
        self.velocity + self.rate.cross(&(self.axis * (sign * 0.5 * self.length)))
    }

    pub fn velocity_a(&self) -> Vector3<f64> {
        self.tip_velocity(1.0)
    }

    pub fn velocity_b(&self) -> Vector3<f64> {
        self.tip_velocity(-1.0)
    }

    /// Perpendicular moment of inertia, kg m^2.
    pub fn inertia(&self) -> f64 {
        self.mass * self.length * self.length / 4.0
    }

    /// Kinetic plus potential energy for gravity `g`.
    pub fn energy(&self, g: f64) -> f64 {
        0.5 * self.mass * self.velocity.norm_squared()
            + 0.5 * self.inertia() * self.rate.norm_squared()
            + self.mass * g * self.center.z
    }

    /// Semi-implicit Euler step under end forces `f_a`, `f_b` (gravity added
    /// here).
    pub fn step(&mut self, f_a: &Vector3<f64>, f_b: &Vector3<f64>, g: f64, dt: f64) {
        let accel = (f_a + f_b) / self.mass - Vector3::new(0.0, 0.0, g);
        let half = self.axis * (0.5 * self.length);
        let torque = half.cross(f_a) - half.cross(f_b);
        self.velocity += accel * dt;
        self.center += self.velocity * dt;
        self.rate += torque / self.inertia() * dt;
        self.axis = UnitQuaternion::from_rotation_vector(&(self.rate * dt))
            .rotate(&self.axis)
            .normalize();
        self.rate -= self.axis * self.rate.dot(&self.axis);
    }
}

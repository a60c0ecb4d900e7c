//! Unilateral penalty contact with a plane.

use nalgebra::Vector3;

use super::config::WallConfig;

/// Penetration of a sphere of radius `contact_radius` at `position`, m.
pub fn penetration(position: &Vector3<f64>, wall: &WallConfig) -> f64 {
    let i = wall.axis.index();
    wall.contact_radius - wall.normal_sign * (position[i] - wall.offset)
}

/// Contact force on the vehicle (the wall takes the opposite). Zero when not
/// touching and never pulling.
pub fn wall_force(position: &Vector3<f64>, velocity: &Vector3<f64>, wall: &WallConfig) -> Vector3<f64> {
    let depth = penetration(position, wall);
    if depth <= 0.0 {
        return Vector3::zeros();
    }
    let i = wall.axis.index();
    let depth_rate = -wall.normal_sign * velocity[i];
    let push = (wall.stiffness * depth + wall.damping * depth_rate).max(0.0);
    let mut f = Vector3::zeros();
    f[i] = wall.normal_sign * push;
    f
}

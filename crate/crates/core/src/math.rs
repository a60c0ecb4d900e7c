//! Quaternion algebra, Modified Rodrigues Parameters and the discrete
//! rate integrator shared by the vehicle model and the estimator.
//!
//! Quaternions are stored as `(qv, qs)` with the scalar part last and use the
//! Hamilton product. A quaternion represents the rotation from the body frame
//! to the inertial frame, so `a * b` applies `b` first:
//! `R(a * b) = R(a) R(b)`.

use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

/// Default MRP parameter `a`; gives the scale factor `f = 2(a + 1) = 4`.
pub const DEFAULT_MRP_A: f64 = 1.0;

/// Below this value of `|omega| * ts` the integrator uses a Taylor expansion
/// instead of dividing by `|omega|`.
const SMALL_ROTATION: f64 = 1e-8;

/// Smallest admissible `|a + qs|` when mapping a quaternion to MRPs.
const MRP_SINGULARITY: f64 = 1e-9;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum MathError {
    /// The rotation is too close to the singular point of the MRP chart.
    #[error("rotation is singular for the MRP chart (|a + qs| = {0:e})")]
    SingularRotation(f64),
}

/// Unit quaternion in canonical form (`qs >= 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    v: Vector3<f64>,
    s: f64,
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl UnitQuaternion {
    pub fn identity() -> Self {
        Self {
            v: Vector3::zeros(),
            s: 1.0,
        }
    }

    /// Builds a unit quaternion from a vector and scalar part, normalizing
    /// and flipping the sign so that `qs >= 0`.
    ///
    /// Panics if the input has zero norm or is not finite.
    pub fn new(v: Vector3<f64>, s: f64) -> Self {
        let norm = (v.norm_squared() + s * s).sqrt();
        assert!(
            norm.is_finite() && norm > 0.0,
            "cannot normalize quaternion with norm {norm}"
        );
        let sign = if s < 0.0 { -1.0 } else { 1.0 };
        Self {
            v: v * (sign / norm),
            s: s * sign / norm,
        }
    }

    /// From `[qx, qy, qz, qs]`.
    pub fn from_array(q: [f64; 4]) -> Self {
        Self::new(Vector3::new(q[0], q[1], q[2]), q[3])
    }

    /// From `[qx, qy, qz, qs]` taken as already normalized, e.g. values
    /// read back from a log. Only checked in debug builds.
    pub fn from_array_unchecked(q: [f64; 4]) -> Self {
        debug_assert!((q.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-9);
        Self {
            v: Vector3::new(q[0], q[1], q[2]),
            s: q[3],
        }
    }

    /// Returns `[qx, qy, qz, qs]`.
    pub fn to_array(&self) -> [f64; 4] {
        [self.v.x, self.v.y, self.v.z, self.s]
    }

    pub fn as_vector4(&self) -> Vector4<f64> {
        Vector4::new(self.v.x, self.v.y, self.v.z, self.s)
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::identity();
        }
        let half = 0.5 * angle;
        Self::new(axis * (half.sin() / n), half.cos())
    }

    /// Rotation about `rv / |rv|` by `|rv|` radians.
    pub fn from_rotation_vector(rv: &Vector3<f64>) -> Self {
        Self::from_axis_angle(rv, rv.norm())
    }

    /// Pure rotation about the inertial z axis.
    pub fn from_yaw(yaw: f64) -> Self {
        Self::from_axis_angle(&Vector3::z(), yaw)
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.v
    }

    pub fn scalar(&self) -> f64 {
        self.s
    }

    pub fn norm(&self) -> f64 {
        (self.v.norm_squared() + self.s * self.s).sqrt()
    }

    /// Conjugate; for unit quaternions this is the inverse rotation.
    pub fn inverse(&self) -> Self {
        // Conjugation keeps qs, so the canonical sign is preserved.
        Self {
            v: -self.v,
            s: self.s,
        }
    }

    /// Rotation matrix mapping body-frame vectors to the inertial frame.
    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        let v = &self.v;
        let s = self.s;
        Matrix3::identity() * (s * s - v.norm_squared())
            + v * v.transpose() * 2.0
            + v.cross_matrix() * (2.0 * s)
    }

    /// Rotates a body-frame vector into the inertial frame.
    pub fn rotate(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.to_rotation_matrix() * x
    }

    /// Rotation angle of `self.inverse() * other`, in `[0, pi]`.
    pub fn angle_to(&self, other: &UnitQuaternion) -> f64 {
        let d = self.inverse() * *other;
        2.0 * d.v.norm().atan2(d.s.abs())
    }

    /// Yaw angle of the ZYX Euler decomposition, in `(-pi, pi]`.
    pub fn yaw(&self) -> f64 {
        let r = self.to_rotation_matrix();
        r[(1, 0)].atan2(r[(0, 0)])
    }

    /// One step of the closed-form rate integrator: `q_{k+1} = Omega(omega) q_k`.
    ///
    /// The body rate is held constant over the step, which makes the update
    /// exact for constant rates. The result is renormalized.
    pub fn integrate(&self, omega: &Vector3<f64>, ts: f64) -> Self {
        let (psi, c) = rate_increment(omega, ts);
        // Omega(omega) q is the Hamilton product q * (psi, c).
        *self * UnitQuaternion::new(psi, c)
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    fn mul(self, b: UnitQuaternion) -> UnitQuaternion {
        let v = b.v * self.s + self.v * b.s + self.v.cross(&b.v);
        let s = self.s * b.s - self.v.dot(&b.v);
        UnitQuaternion::new(v, s)
    }
}

/// `(Psi, cos(|omega| ts / 2))` with `Psi = sin(|omega| ts / 2) omega / |omega|`.
fn rate_increment(omega: &Vector3<f64>, ts: f64) -> (Vector3<f64>, f64) {
    let rate = omega.norm();
    let half = 0.5 * rate * ts;
    if rate * ts < SMALL_ROTATION {
        // sin(x)/|omega| ~ (ts/2)(1 - x^2/6), cos(x) ~ 1 - x^2/2
        let psi = omega * (0.5 * ts * (1.0 - half * half / 6.0));
        (psi, 1.0 - 0.5 * half * half)
    } else {
        (omega * (half.sin() / rate), half.cos())
    }
}

/// The 4x4 transition matrix `Omega(omega)` acting on `[qv; qs]`.
///
/// Upper-left block is `cos I - [Psi x]`, which keeps the matrix orthogonal.
pub fn omega_matrix(omega: &Vector3<f64>, ts: f64) -> Matrix4<f64> {
    let (psi, c) = rate_increment(omega, ts);
    let mut m = Matrix4::zeros();
    let upper = Matrix3::identity() * c - psi.cross_matrix();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&upper);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&psi);
    m.fixed_view_mut::<1, 3>(3, 0).copy_from(&(-psi.transpose()));
    m[(3, 3)] = c;
    m
}

/// Modified Rodrigues Parameters with the generalized scale `f = 2(a + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mrp(pub Vector3<f64>);

impl Mrp {
    pub fn zero() -> Self {
        Mrp(Vector3::zeros())
    }

    /// `p = f qv / (a + qs)`.
    pub fn from_quat(dq: &UnitQuaternion, a: f64) -> Result<Mrp, MathError> {
        let den = a + dq.s;
        if den.abs() < MRP_SINGULARITY {
            return Err(MathError::SingularRotation(den.abs()));
        }
        let f = 2.0 * (a + 1.0);
        Ok(Mrp(dq.v * (f / den)))
    }

    /// Inverse map:
    /// `qs = (-a |p|^2 + f sqrt(f^2 + (1 - a^2)|p|^2)) / (f^2 + |p|^2)`,
    /// `qv = (a + qs) p / f`.
    pub fn to_quat(&self, a: f64) -> UnitQuaternion {
        let f = 2.0 * (a + 1.0);
        let p2 = self.0.norm_squared();
        let s = (-a * p2 + f * (f * f + (1.0 - a * a) * p2).sqrt()) / (f * f + p2);
        let v = self.0 * ((a + s) / f);
        UnitQuaternion::new(v, s)
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}

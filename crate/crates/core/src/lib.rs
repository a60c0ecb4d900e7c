//! External wrench estimation and admittance control for hexacopters, with a
//! deterministic closed-loop simulator for collision detection, human
//! interaction and communication-free cooperative payload transport.

pub mod admittance;
pub mod dynamics;
pub mod estimator;
pub mod math;
pub mod sim;

pub use dynamics::{RotorSpeeds, SimState, VehicleParams, Wrench};
pub use estimator::{FilterParams, Measurement, WrenchEstimator};
pub use math::{Mrp, UnitQuaternion};

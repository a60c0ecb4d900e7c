//! Closed-loop scenario engine: ground truth for one or two vehicles, an
//! optional rod payload on ropes, wall contact, noisy sensing and the
//! onboard agents.

pub mod agent;
pub mod config;
pub mod controller;
pub mod log;
pub mod noise;
pub mod payload;
pub mod rope;
pub mod scenario;
pub mod trajectory;
pub mod wall;

pub use agent::{replay, AdmittanceAgent, AgentConfig, AgentOutput, EstimatorRunner, LeaderAgent};
pub use config::{ScenarioConfig, ScenarioKind};
pub use controller::{pose_controller, ControllerGains, PoseController};
pub use log::{Event, EventKind, Frame, SimLog, VehicleLog};
pub use rope::{rope_force, RopeModel};
pub use scenario::{
    run, run_coop_transport, run_leash, run_wall_collision, synthesize_replay, SimError,
};

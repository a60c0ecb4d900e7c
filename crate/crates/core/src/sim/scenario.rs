//! Scenario wiring and the fixed-step closed loop.
//!
//! Each sample `k` at `t = k ts`: every vehicle is measured, its agent runs
//! and commands rotor speeds, the frame is logged, then ground truth (and
//! the payload, if any) advances over `substeps` sub-intervals with contact
//! and rope forces re-evaluated at each one.

use nalgebra::Vector3;

use crate::admittance::{AdmittanceError, ReferencePose};
use crate::dynamics::{self, RotorSpeeds, SimState, VehicleParams, Wrench};
use crate::estimator::EstimatorError;

use super::agent::{
    AdmittanceAgent, AgentConfig, AgentOutput, CollisionConfig, CollisionUpdate, LeaderAgent,
};
use super::config::{CoopConfig, InvalidScenario, ScenarioConfig, ScenarioKind, TruthIntegrator};
use super::log::{Event, EventKind, Frame, SimLog, VehicleLog};
use super::noise::NoiseModel;
use super::payload::Payload;
use super::rope::{rope_force, RopeModel};
use super::trajectory::{ForceScript, Trajectory};
use super::wall::{penetration, wall_force};

#[derive(thiserror::Error, Debug)]
pub enum SimError {
    #[error(transparent)]
    Invalid(#[from] InvalidScenario),
    #[error(transparent)]
    Admittance(#[from] AdmittanceError),
    #[error("estimator on vehicle {vehicle} failed at t = {t:.3} s: {source}")]
    Estimator {
        vehicle: usize,
        t: f64,
        #[source]
        source: EstimatorError,
    },
    /// The log up to and including the offending sample is attached.
    #[error("divergence detected at t = {t:.3} s: vehicle separation {separation:.3} m")]
    DivergenceDetected { t: f64, separation: f64, log: Box<SimLog> },
}

enum Onboard {
    Leader(LeaderAgent),
    Follower(Box<AdmittanceAgent>),
}

struct Coupling {
    payload: Payload,
    rope: RopeModel,
    max_separation: f64,
}

struct World {
    params: VehicleParams,
    sub_params: VehicleParams,
    substeps: usize,
    integrator: TruthIntegrator,
    states: Vec<SimState>,
    script: ForceScript,
    wall: Option<super::config::WallConfig>,
    coupling: Option<Coupling>,
    in_contact: bool,
    last_contact: Option<f64>,
}

impl World {
    /// External wrench on each vehicle and rope forces on the payload ends.
    fn forces(&self, t: f64, states: &[SimState]) -> (Vec<Wrench>, Option<(Vector3<f64>, Vector3<f64>)>) {
        let mut w = vec![Wrench::zero(); states.len()];
        if !self.script.is_empty() {
            w[0] = w[0] + self.script.at(t);
        }
        if let Some(wall) = &self.wall {
            for (wi, s) in w.iter_mut().zip(states) {
                wi.force += wall_force(&s.position, &s.velocity, wall);
            }
        }
        let mut ends = None;
        if let Some(c) = &self.coupling {
            let p = &c.payload;
            let (on_m, on_a) = rope_force(&states[0].position, &p.end_a(), &states[0].velocity, &p.velocity_a(), &c.rope);
            let (on_s, on_b) = rope_force(&states[1].position, &p.end_b(), &states[1].velocity, &p.velocity_b(), &c.rope);
            w[0].force += on_m;
            w[1].force += on_s;
            ends = Some((on_a, on_b));
        }
        (w, ends)
    }

    fn advance(&mut self, t0: f64, rotors: &[RotorSpeeds], events: &mut Vec<Event>) {
        let h = self.sub_params.ts;
        for j in 0..self.substeps {
            let t = t0 + j as f64 * h;
            let (w, ends) = self.forces(t, &self.states);
            for (i, s) in self.states.iter_mut().enumerate() {
                *s = match self.integrator {
                    TruthIntegrator::Euler => dynamics::step(s, &rotors[i], &w[i], &self.sub_params),
                    TruthIntegrator::Rk4 => dynamics::step_rk4(s, &rotors[i], &w[i], &self.sub_params, 1),
                };
            }
            if let (Some(c), Some((fa, fb))) = (&mut self.coupling, ends) {
                c.payload.step(&fa, &fb, self.params.gravity, h);
            }
            if let Some(wall) = &self.wall {
                let touching = penetration(&self.states[0].position, wall) > 0.0;
                if touching && !self.in_contact {
                    let tc = t + h;
                    self.last_contact = Some(tc);
                    events.push(Event {
                        t: tc,
                        vehicle: 0,
                        kind: EventKind::Contact,
                    });
                }
                self.in_contact = touching;
            }
        }
    }
}

fn hold(pose: &super::config::Pose) -> ReferencePose {
    ReferencePose::new(pose.position(), pose.yaw)
}

fn follower_config(cfg: &ScenarioConfig, trajectory: Trajectory) -> AgentConfig {
    AgentConfig {
        vehicle: cfg.vehicle,
        filter: cfg.filter,
        controller: cfg.controller,
        hover: cfg.hover,
        admittance: None,
        collision: None,
        trajectory,
    }
}

fn initial_payload(coop: &CoopConfig, master: &Vector3<f64>, slave: &Vector3<f64>, g: f64) -> Payload {
    let m_end = 0.5 * coop.payload.mass;
    let drop = coop.rope.rest_length + m_end * g / coop.rope.stiffness;
    let down = Vector3::new(0.0, 0.0, drop);
    Payload::at_rest(&coop.payload, master - down, slave - down)
}

/// Runs any scenario kind.
pub fn run(cfg: &ScenarioConfig) -> Result<SimLog, SimError> {
    cfg.validate()?;
    let params = cfg.vehicle;
    let main_traj = Trajectory::new(hold(&cfg.initial), cfg.trajectory.clone());

    let mut agents = Vec::new();
    let mut states = vec![SimState::at_rest(cfg.initial.position(), cfg.initial.yaw)];
    let mut coupling = None;
    match cfg.kind {
        ScenarioKind::CoopTransport => {
            let coop = cfg.coop.as_ref().expect("validated");
            agents.push(Onboard::Leader(LeaderAgent::new(params, cfg.controller, main_traj)));
            let mut pose = coop.slave_initial;
            let start = pose.position();
            if let Some(z) = coop.slave_altitude {
                pose.position[2] = z;
            }
            let mut slave = follower_config(cfg, Trajectory::hold(hold(&pose)));
            slave.admittance = Some(cfg.admittance);
            agents.push(Onboard::Follower(Box::new(AdmittanceAgent::new(slave)?)));
            states.push(SimState::at_rest(start, coop.slave_initial.yaw));
            coupling = Some(Coupling {
                payload: initial_payload(coop, &states[0].position, &start, params.gravity),
                rope: coop.rope,
                max_separation: coop.payload.length + coop.rope.rest_length + coop.divergence_margin,
            });
        }
        kind => {
            let mut a = follower_config(cfg, main_traj);
            if kind == ScenarioKind::Leash {
                a.admittance = Some(cfg.admittance);
            }
            if kind == ScenarioKind::WallCollision {
                a.collision = cfg.wall.as_ref().map(CollisionConfig::from);
            }
            agents.push(Onboard::Follower(Box::new(AdmittanceAgent::new(a)?)));
        }
    }

    let mut sub_params = params;
    sub_params.ts = params.ts / cfg.substeps as f64;
    let mut world = World {
        params,
        sub_params,
        substeps: cfg.substeps,
        integrator: cfg.truth_integrator,
        states,
        script: ForceScript::new(cfg.force_script.clone()),
        wall: cfg.wall,
        coupling,
        in_contact: false,
        last_contact: None,
    };
    let mut noise: Vec<NoiseModel> =
        (0..agents.len()).map(|i| NoiseModel::new(cfg.noise, cfg.seed, i as u64)).collect();

    let mut log = SimLog {
        kind: cfg.kind,
        ts: params.ts,
        vehicles: vec![VehicleLog::default(); agents.len()],
        events: Vec::new(),
    };
    let steps = cfg.steps();
    for k in 0..=steps {
        let t = k as f64 * params.ts;
        let (true_w, _) = world.forces(t, &world.states);
        let mut rotors = Vec::with_capacity(agents.len());
        for (i, agent) in agents.iter_mut().enumerate() {
            let z = noise[i].measure(&world.states[i]);
            let out: AgentOutput = match agent {
                Onboard::Leader(a) => a.tick(t, &z),
                Onboard::Follower(a) => a.tick(t, &z).map_err(|source| SimError::Estimator {
                    vehicle: i,
                    t,
                    source,
                })?,
            };
            record_events(&mut log.events, t, i, &out, world.last_contact);
            log.vehicles[i].frames.push(Frame {
                t,
                truth: world.states[i],
                measurement: z,
                rotors: out.rotors,
                estimate: out.estimate,
                true_wrench: true_w[i],
                reference: out.reference,
                mode: out.mode,
            });
            rotors.push(out.rotors);
        }
        if let Some(c) = &world.coupling {
            let separation = (world.states[0].position - world.states[1].position).norm();
            if separation > c.max_separation {
                log.events.push(Event {
                    t,
                    vehicle: 1,
                    kind: EventKind::Divergence { separation },
                });
                return Err(SimError::DivergenceDetected {
                    t,
                    separation,
                    log: Box::new(log),
                });
            }
        }
        if k < steps {
            world.advance(t, &rotors, &mut log.events);
        }
    }
    Ok(log)
}

fn record_events(events: &mut Vec<Event>, t: f64, vehicle: usize, out: &AgentOutput, contact: Option<f64>) {
    if let Some(tr) = out.transition {
        events.push(Event {
            t,
            vehicle,
            kind: EventKind::ModeChange {
                from: tr.from,
                to: tr.to,
                trigger: tr.trigger,
            },
        });
    }
    let safe = |c: &super::agent::Collision, out: &AgentOutput| EventKind::SafeReference {
        position: out.reference.position,
        peak_force: c.peak_force,
    };
    match &out.collision {
        Some(CollisionUpdate::Detected(c)) => {
            events.push(Event {
                t,
                vehicle,
                kind: EventKind::CollisionDetected {
                    force: c.peak_force,
                    latency: contact.map(|tc| t - tc),
                },
            });
            events.push(Event { t, vehicle, kind: safe(c, out) });
        }
        Some(CollisionUpdate::Refined(c)) => events.push(Event { t, vehicle, kind: safe(c, out) }),
        None => {}
    }
}

fn expect_kind(cfg: &ScenarioConfig, kind: ScenarioKind) -> Result<(), SimError> {
    if cfg.kind != kind {
        return Err(InvalidScenario(format!("expected a {} scenario, got {}", kind.name(), cfg.kind.name())).into());
    }
    Ok(())
}

pub fn run_wall_collision(cfg: &ScenarioConfig) -> Result<SimLog, SimError> {
    expect_kind(cfg, ScenarioKind::WallCollision)?;
    run(cfg)
}

pub fn run_leash(cfg: &ScenarioConfig) -> Result<SimLog, SimError> {
    expect_kind(cfg, ScenarioKind::Leash)?;
    run(cfg)
}

pub fn run_coop_transport(cfg: &ScenarioConfig) -> Result<SimLog, SimError> {
    expect_kind(cfg, ScenarioKind::CoopTransport)?;
    run(cfg)
}

/// Single-vehicle run whose log feeds offline replay.
pub fn synthesize_replay(cfg: &ScenarioConfig) -> Result<SimLog, SimError> {
    if cfg.kind == ScenarioKind::CoopTransport {
        return Err(InvalidScenario("replay synthesis needs a single-vehicle scenario".into()).into());
    }
    run(cfg)
}

//! Admittance controller: turns the estimated external wrench into a
//! compliant pose reference by simulating a mass-spring-damper per axis
//! (x, y, z and yaw), wrapped in a small state machine that handles
//! engagement, offset calibration, drift rejection and landing.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::Wrench;
use crate::math::wrap_angle;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum AdmittanceError {
    #[error("offset calibration window is empty")]
    EmptyWindow,
    #[error("invalid gains on axis `{axis}`: {reason}")]
    InvalidGains { axis: &'static str, reason: String },
    #[error("gains on axis `{axis}` are unstable at ts = {ts} (spectral radius {radius})")]
    Unstable {
        axis: &'static str,
        ts: f64,
        radius: f64,
    },
}

/// Virtual mass (or inertia), damping and stiffness of one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisGains {
    /// kg (kg m^2 for yaw)
    pub mass: f64,
    /// N s/m (N m s/rad for yaw)
    pub damping: f64,
    /// N/m (N m/rad for yaw)
    pub stiffness: f64,
}

impl AxisGains {
    pub fn new(mass: f64, damping: f64, stiffness: f64) -> Self {
        Self {
            mass,
            damping,
            stiffness,
        }
    }

    /// Eigenvalues' largest modulus of the semi-implicit Euler transition
    /// matrix `[[1 - h^2 K/m, h (1 - h c/m)], [-h K/m, 1 - h c/m]]`.
    pub fn spectral_radius(&self, ts: f64) -> f64 {
        let d = ts * self.damping / self.mass;
        let k = ts * ts * self.stiffness / self.mass;
        let tr = 2.0 - d - k;
        let det = 1.0 - d;
        let disc = tr * tr - 4.0 * det;
        if disc >= 0.0 {
            let r = disc.sqrt();
            ((tr + r) / 2.0).abs().max(((tr - r) / 2.0).abs())
        } else {
            det.abs().sqrt()
        }
    }

    fn validate(&self, axis: &'static str, ts: f64, allow_pure_mass: bool) -> Result<(), AdmittanceError> {
        let invalid = |reason: &str| AdmittanceError::InvalidGains {
            axis,
            reason: reason.to_string(),
        };
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(invalid("mass must be > 0"));
        }
        if !(self.damping.is_finite() && self.damping >= 0.0) {
            return Err(invalid("damping must be >= 0"));
        }
        if !(self.stiffness.is_finite() && self.stiffness >= 0.0) {
            return Err(invalid("stiffness must be >= 0"));
        }
        if self.damping == 0.0 && self.stiffness == 0.0 {
            return if allow_pure_mass {
                Ok(())
            } else {
                Err(invalid("damping and stiffness are both zero"))
            };
        }
        // Bounded input needs c > 0; with K = 0 the position root sits at 1
        // and the velocity root must be strictly inside the unit circle.
        let d = ts * self.damping / self.mass;
        let k = ts * ts * self.stiffness / self.mass;
        let stable = d > 0.0 && d < 2.0 && 4.0 - 2.0 * d - k > 0.0;
        if !stable {
            return Err(AdmittanceError::Unstable {
                axis,
                ts,
                radius: self.spectral_radius(ts),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmittanceGains {
    pub x: AxisGains,
    pub y: AxisGains,
    pub z: AxisGains,
    pub yaw: AxisGains,
}

impl Default for AdmittanceGains {
    fn default() -> Self {
        Self {
            x: AxisGains::new(1.5, 4.0, 0.0),
            y: AxisGains::new(1.5, 4.0, 0.0),
            z: AxisGains::new(1.5, 4.0, 10.0),
            yaw: AxisGains::new(0.1, 0.4, 0.5),
        }
    }
}

impl AdmittanceGains {
    pub fn axes(&self) -> [(&'static str, &AxisGains); 4] {
        [("x", &self.x), ("y", &self.y), ("z", &self.z), ("yaw", &self.yaw)]
    }

    /// Rejects invalid gains and configurations whose discrete roots leave
    /// the unit circle at sample time `ts`.
    pub fn validate(&self, ts: f64, allow_pure_mass: bool) -> Result<(), AdmittanceError> {
        for (axis, g) in self.axes() {
            g.validate(axis, ts, allow_pure_mass)?;
        }
        Ok(())
    }
}

/// Sign of the force term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmittanceSign {
    /// Steady state `K (Λ_r - Λ_d) = F`: the reference moves with the force.
    #[default]
    Compliant,
    /// `m (Λ̈_d - Λ̈_r) + c (Λ̇_d - Λ̇_r) + K (Λ_d - Λ_r) = F` as printed.
    PaperVerbatim,
}

impl AdmittanceSign {
    fn factor(self) -> f64 {
        match self {
            AdmittanceSign::Compliant => 1.0,
            AdmittanceSign::PaperVerbatim => -1.0,
        }
    }
}

/// Position and yaw setpoint; derivatives are implicitly zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReferencePose {
    pub position: Vector3<f64>,
    /// rad, in (-pi, pi]
    pub yaw: f64,
}

impl ReferencePose {
    pub fn new(position: Vector3<f64>, yaw: f64) -> Self {
        Self {
            position,
            yaw: wrap_angle(yaw),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FsmConfig {
    /// Per-axis thresholds below which the wrench is ignored: x, y, z in N,
    /// yaw in N m.
    pub deadband: [f64; 4],
    /// Offset averaging window, s.
    pub t_avg: f64,
    /// Landing force threshold, N.
    pub landing_force: f64,
    /// Landing angle threshold from the inertial z axis, rad.
    pub landing_angle: f64,
    /// Time the landing condition must hold, s.
    pub t_landing: f64,
}

impl Default for FsmConfig {
    fn default() -> Self {
        Self {
            deadband: [0.5, 0.5, 0.5, 0.02],
            t_avg: 4.0,
            landing_force: 10.0,
            landing_angle: 20f64.to_radians(),
            t_landing: 0.5,
        }
    }
}

impl FsmConfig {
    pub fn validate(&self) -> Result<(), AdmittanceError> {
        let times = [self.t_avg, self.landing_force, self.landing_angle, self.t_landing];
        if self.deadband.iter().chain(&times).any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(AdmittanceError::InvalidGains {
                axis: "fsm",
                reason: "thresholds and times must be finite and >= 0".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Disengaged,
    Calibrating,
    Engaged,
    Landed,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Disengaged => "disengaged",
            Mode::Calibrating => "calibrating",
            Mode::Engaged => "engaged",
            Mode::Landed => "landed",
        }
    }

    pub fn from_name(s: &str) -> Option<Mode> {
        [Mode::Disengaged, Mode::Calibrating, Mode::Engaged, Mode::Landed]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trigger {
    Hovering,
    HoverLost,
    CalibrationDone,
    LandingDetected,
}

impl Trigger {
    pub fn name(self) -> &'static str {
        match self {
            Trigger::Hovering => "hovering",
            Trigger::HoverLost => "hover_lost",
            Trigger::CalibrationDone => "calibration_done",
            Trigger::LandingDetected => "landing_detected",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub from: Mode,
    pub to: Mode,
    pub trigger: Trigger,
}

/// Position and rate of one virtual mass.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AxisState {
    pub position: f64,
    pub velocity: f64,
}

impl AxisState {
    /// One semi-implicit Euler step of `m a + c v + K (x - x_d) = s F`
    /// where `error` is `x - x_d`.
    fn step(&mut self, error: f64, force: f64, gains: &AxisGains, sign: AdmittanceSign, ts: f64) {
        let accel = (sign.factor() * force - gains.damping * self.velocity - gains.stiffness * error)
            / gains.mass;
        self.velocity += accel * ts;
        self.position += self.velocity * ts;
    }
}

/// Advances the four virtual masses by one sample. `wrench` is the
/// offset-corrected, deadbanded wrench.
pub fn admittance_step(
    axes: &mut [AxisState; 4],
    desired: &ReferencePose,
    wrench: &Wrench,
    gains: &AdmittanceGains,
    sign: AdmittanceSign,
    ts: f64,
) -> ReferencePose {
    let g = [&gains.x, &gains.y, &gains.z];
    for i in 0..3 {
        let err = axes[i].position - desired.position[i];
        axes[i].step(err, wrench.force[i], g[i], sign, ts);
    }
    let yaw = &mut axes[3];
    let err = wrap_angle(yaw.position - desired.yaw);
    yaw.step(err, wrench.torque, &gains.yaw, sign, ts);
    yaw.position = wrap_angle(yaw.position);
    ReferencePose {
        position: Vector3::new(axes[0].position, axes[1].position, axes[2].position),
        yaw: axes[3].position,
    }
}

/// Mean of the wrench samples collected while hovering.
pub fn calibrate_offset(samples: &[Wrench]) -> Result<Wrench, AdmittanceError> {
    if samples.is_empty() {
        return Err(AdmittanceError::EmptyWindow);
    }
    let n = samples.len() as f64;
    let sum = samples.iter().fold(Wrench::zero(), |acc, w| acc + *w);
    Ok(Wrench::new(sum.force / n, sum.torque / n))
}

/// Instantaneous landing condition: force above threshold and within
/// `landing_angle` of `+z` (ground reaction).
pub fn landing_condition(wrench: &Wrench, cfg: &FsmConfig) -> bool {
    let f = &wrench.force;
    let mag = f.norm();
    if !(mag > cfg.landing_force) {
        return false;
    }
    let angle = (f.z / mag).clamp(-1.0, 1.0).acos();
    angle < cfg.landing_angle
}

/// Landing is detected once the condition has held for `t_landing`;
/// `elapsed` is how long it has held so far.
pub fn detect_landing(wrench: &Wrench, cfg: &FsmConfig, elapsed: f64) -> bool {
    landing_condition(wrench, cfg) && elapsed >= cfg.t_landing
}

/// Per-axis hard gate: components below their threshold are set to zero.
pub fn apply_deadband(wrench: &Wrench, deadband: &[f64; 4]) -> Wrench {
    let gate = |x: f64, t: f64| if x.abs() < t { 0.0 } else { x };
    Wrench::new(
        Vector3::new(
            gate(wrench.force.x, deadband[0]),
            gate(wrench.force.y, deadband[1]),
            gate(wrench.force.z, deadband[2]),
        ),
        gate(wrench.torque, deadband[3]),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceState {
    pub axes: [AxisState; 4],
    pub mode: Mode,
    pub offset: Wrench,
    /// Time the landing condition has held, s.
    pub landing_timer: f64,
    /// Samples collected during calibration.
    pub window: Vec<Wrench>,
    /// Last emitted reference.
    pub output: ReferencePose,
}

/// Admittance controller with its state machine.
#[derive(Debug, Clone)]
pub struct AdmittanceController {
    gains: AdmittanceGains,
    fsm: FsmConfig,
    sign: AdmittanceSign,
    ts: f64,
    state: AdmittanceState,
}

impl AdmittanceController {
    /// Starts disengaged with the reference held at `initial`.
    pub fn new(
        gains: AdmittanceGains,
        fsm: FsmConfig,
        sign: AdmittanceSign,
        ts: f64,
        initial: ReferencePose,
    ) -> Result<Self, AdmittanceError> {
        gains.validate(ts, false)?;
        fsm.validate()?;
        Ok(Self::new_unchecked(gains, fsm, sign, ts, initial))
    }

    /// Like [`new`](Self::new) but accepts pure-mass axes (`c = K = 0`).
    pub fn new_pure_mass(
        gains: AdmittanceGains,
        fsm: FsmConfig,
        sign: AdmittanceSign,
        ts: f64,
        initial: ReferencePose,
    ) -> Result<Self, AdmittanceError> {
        gains.validate(ts, true)?;
        fsm.validate()?;
        Ok(Self::new_unchecked(gains, fsm, sign, ts, initial))
    }

    fn new_unchecked(
        gains: AdmittanceGains,
        fsm: FsmConfig,
        sign: AdmittanceSign,
        ts: f64,
        initial: ReferencePose,
    ) -> Self {
        let p = initial.position;
        let axes = [p.x, p.y, p.z, initial.yaw].map(|position| AxisState {
            position,
            velocity: 0.0,
        });
        Self {
            gains,
            fsm,
            sign,
            ts,
            state: AdmittanceState {
                axes,
                mode: Mode::Disengaged,
                offset: Wrench::zero(),
                landing_timer: 0.0,
                window: Vec::new(),
                output: initial,
            },
        }
    }

    pub fn state(&self) -> &AdmittanceState {
        &self.state
    }

    pub fn mode(&self) -> Mode {
        self.state.mode
    }

    pub fn gains(&self) -> &AdmittanceGains {
        &self.gains
    }

    pub fn fsm_config(&self) -> &FsmConfig {
        &self.fsm
    }

    /// Offset-corrected and deadbanded wrench as used by the integrator.
    pub fn effective_wrench(&self, wrench: &Wrench) -> Wrench {
        apply_deadband(&(*wrench - self.state.offset), &self.fsm.deadband)
    }

    /// Advances the state machine by one sample.
    pub fn fsm_tick(&mut self, wrench: &Wrench, hovering: bool) -> Option<Transition> {
        let st = &mut self.state;
        let from = st.mode;
        let (to, trigger) = match st.mode {
            Mode::Disengaged if hovering => {
                st.window.clear();
                (Mode::Calibrating, Trigger::Hovering)
            }
            Mode::Calibrating if !hovering => (Mode::Disengaged, Trigger::HoverLost),
            Mode::Calibrating => {
                st.window.push(*wrench);
                if st.window.len() as f64 * self.ts + 1e-9 >= self.fsm.t_avg {
                    // The window is never empty here.
                    st.offset = calibrate_offset(&st.window).unwrap_or_default();
                    st.window.clear();
                    for a in st.axes.iter_mut() {
                        a.velocity = 0.0;
                    }
                    (Mode::Engaged, Trigger::CalibrationDone)
                } else {
                    return None;
                }
            }
            Mode::Engaged => {
                let corrected = *wrench - st.offset;
                if landing_condition(&corrected, &self.fsm) {
                    st.landing_timer += self.ts;
                } else {
                    st.landing_timer = 0.0;
                }
                if detect_landing(&corrected, &self.fsm, st.landing_timer + 1e-9) {
                    (Mode::Landed, Trigger::LandingDetected)
                } else {
                    return None;
                }
            }
            _ => return None,
        };
        st.mode = to;
        Some(Transition { from, to, trigger })
    }

    /// One controller cycle: state machine, then integration while engaged.
    /// Returns the reference to track and the mode transition, if any.
    pub fn tick(
        &mut self,
        desired: &ReferencePose,
        wrench: &Wrench,
        hovering: bool,
    ) -> (ReferencePose, Option<Transition>) {
        let transition = self.fsm_tick(wrench, hovering);
        if self.state.mode == Mode::Engaged {
            let w = self.effective_wrench(wrench);
            self.state.output =
                admittance_step(&mut self.state.axes, desired, &w, &self.gains, self.sign, self.ts);
        }
        (self.state.output, transition)
    }

    /// Reference currently held.
    pub fn output(&self) -> ReferencePose {
        self.state.output
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const TS: f64 = 0.01;

    fn engaged(gains: AdmittanceGains, fsm: FsmConfig) -> AdmittanceController {
        let mut c = AdmittanceController::new(
            gains,
            fsm,
            AdmittanceSign::Compliant,
            TS,
            ReferencePose::default(),
        )
        .unwrap();
        c.state.mode = Mode::Engaged;
        c
    }

    fn no_deadband() -> FsmConfig {
        FsmConfig {
            deadband: [0.0; 4],
            ..FsmConfig::default()
        }
    }

    fn push_x(c: &mut AdmittanceController, f: f64, steps: usize) -> Vec<f64> {
        let w = Wrench::new(Vector3::new(f, 0.0, 0.0), 0.0);
        (0..steps)
            .map(|_| c.tick(&ReferencePose::default(), &w, true).0.position.x)
            .collect()
    }

    #[test]
    fn zero_wrench_holds_desired_pose() {
        let desired = ReferencePose::new(Vector3::new(1.0, 2.0, 3.0), 0.5);
        let mut c = AdmittanceController::new(
            AdmittanceGains::default(),
            no_deadband(),
            AdmittanceSign::Compliant,
            TS,
            desired,
        )
        .unwrap();
        c.state.mode = Mode::Engaged;
        for _ in 0..1000 {
            assert_eq!(c.tick(&desired, &Wrench::zero(), true).0, desired);
        }
    }

    #[test]
    fn spring_steady_state_is_force_over_stiffness() {
        let mut g = AdmittanceGains::default();
        g.x = AxisGains::new(1.5, 4.0, 10.0);
        let mut c = engaged(g, no_deadband());
        // Ten slowest time constants.
        let xs = push_x(&mut c, 5.0, 2000);
        assert_relative_eq!(*xs.last().unwrap(), 0.5, max_relative = 0.01);
    }

    #[test]
    fn critically_damped_approach_is_monotone() {
        let (m, k) = (1.5, 10.0);
        let mut g = AdmittanceGains::default();
        g.x = AxisGains::new(m, 2.0 * (k * m as f64).sqrt(), k);
        let mut c = engaged(g, no_deadband());
        let xs = push_x(&mut c, 5.0, 1000);
        assert!(xs.windows(2).all(|w| w[1] >= w[0]));
        assert!(xs.iter().all(|x| *x <= 0.5 + 1e-12));
    }

    #[test]
    fn damper_only_axis_reaches_terminal_velocity() {
        let mut c = engaged(AdmittanceGains::default(), no_deadband());
        push_x(&mut c, 2.0, 1000);
        assert_relative_eq!(c.state.axes[0].velocity, 2.0 / 4.0, max_relative = 1e-6);
    }

    #[test]
    fn yaw_channel_uses_same_law_on_wrapped_angle() {
        let desired = ReferencePose::new(Vector3::zeros(), 3.0);
        let mut c = AdmittanceController::new(
            AdmittanceGains::default(),
            no_deadband(),
            AdmittanceSign::Compliant,
            TS,
            desired,
        )
        .unwrap();
        c.state.mode = Mode::Engaged;
        // 0.25 N m with K = 0.5 settles 0.5 rad past the desired yaw, which
        // crosses pi.
        let w = Wrench::new(Vector3::zeros(), 0.25);
        let mut out = desired;
        for _ in 0..3000 {
            out = c.tick(&desired, &w, true).0;
            assert!(out.yaw > -std::f64::consts::PI && out.yaw <= std::f64::consts::PI);
        }
        assert_relative_eq!(wrap_angle(out.yaw - 3.0), 0.5, max_relative = 0.01);
    }

    #[test]
    fn paper_sign_retreats_from_force() {
        let mut g = AdmittanceGains::default();
        g.x = AxisGains::new(1.5, 4.0, 10.0);
        let mut c = AdmittanceController::new(
            g,
            no_deadband(),
            AdmittanceSign::PaperVerbatim,
            TS,
            ReferencePose::default(),
        )
        .unwrap();
        c.state.mode = Mode::Engaged;
        let xs = push_x(&mut c, 5.0, 2000);
        assert_relative_eq!(*xs.last().unwrap(), -0.5, max_relative = 0.01);
    }

    #[test]
    fn stability_check_rejects_stiff_or_undamped_gains() {
        let mut g = AdmittanceGains::default();
        g.x = AxisGains::new(0.01, 4.0, 0.0);
        assert!(matches!(
            g.validate(TS, false),
            Err(AdmittanceError::Unstable { axis: "x", .. })
        ));
        let mut g = AdmittanceGains::default();
        g.z = AxisGains::new(1.5, 1.0, 1e6);
        assert!(g.validate(TS, false).is_err());
        let mut g = AdmittanceGains::default();
        g.y = AxisGains::new(1.5, 0.0, 10.0);
        assert!(g.validate(TS, false).is_err());
        let mut g = AdmittanceGains::default();
        g.y = AxisGains::new(1.5, 0.0, 0.0);
        assert!(g.validate(TS, false).is_err());
        assert!(g.validate(TS, true).is_ok());
        assert!(AdmittanceGains::default().validate(TS, false).is_ok());
        assert!(AxisGains::new(1.5, 4.0, 10.0).spectral_radius(TS) < 1.0);
    }

    #[test]
    fn not_hovering_stays_disengaged() {
        let mut c = AdmittanceController::new(
            AdmittanceGains::default(),
            FsmConfig::default(),
            AdmittanceSign::Compliant,
            TS,
            ReferencePose::default(),
        )
        .unwrap();
        let w = Wrench::new(Vector3::new(30.0, -5.0, 2.0), 1.0);
        for _ in 0..500 {
            let (out, t) = c.tick(&ReferencePose::default(), &w, false);
            assert_eq!(t, None);
            assert_eq!(out, ReferencePose::default());
        }
        assert_eq!(c.mode(), Mode::Disengaged);
    }

    #[test]
    fn calibration_engages_after_averaging_window() {
        let fsm = FsmConfig {
            t_avg: 1.0,
            ..FsmConfig::default()
        };
        let mut c = AdmittanceController::new(
            AdmittanceGains::default(),
            fsm,
            AdmittanceSign::Compliant,
            TS,
            ReferencePose::default(),
        )
        .unwrap();
        let bias = Wrench::new(Vector3::new(0.3, -0.2, 1.8), 0.01);
        let (_, t) = c.tick(&ReferencePose::default(), &bias, true);
        assert_eq!(t.unwrap().to, Mode::Calibrating);
        let mut engaged_at = None;
        for k in 1..=200 {
            if let (_, Some(t)) = c.tick(&ReferencePose::default(), &bias, true) {
                assert_eq!((t.from, t.to, t.trigger), (Mode::Calibrating, Mode::Engaged, Trigger::CalibrationDone));
                engaged_at = Some(k);
            }
        }
        assert_eq!(engaged_at, Some(100));
        assert_relative_eq!(c.state.offset.force, bias.force, epsilon = 1e-12);
        // The bias is cancelled, so the reference does not move.
        assert_eq!(c.output(), ReferencePose::default());
    }

    #[test]
    fn losing_hover_aborts_calibration() {
        let mut c = AdmittanceController::new(
            AdmittanceGains::default(),
            FsmConfig::default(),
            AdmittanceSign::Compliant,
            TS,
            ReferencePose::default(),
        )
        .unwrap();
        c.tick(&ReferencePose::default(), &Wrench::zero(), true);
        let (_, t) = c.tick(&ReferencePose::default(), &Wrench::zero(), false);
        assert_eq!(t.unwrap().trigger, Trigger::HoverLost);
        assert_eq!(c.mode(), Mode::Disengaged);
    }

    #[test]
    fn sub_deadband_force_holds_reference() {
        let mut c = engaged(AdmittanceGains::default(), FsmConfig::default());
        let w = Wrench::new(Vector3::new(0.49, -0.49, 0.3), 0.019);
        for _ in 0..1000 {
            assert_eq!(c.tick(&ReferencePose::default(), &w, true).0, ReferencePose::default());
        }
        // Gating is per axis: x above threshold moves only x.
        let w = Wrench::new(Vector3::new(1.0, -0.49, 0.3), 0.0);
        let out = c.tick(&ReferencePose::default(), &w, true).0;
        assert!(out.position.x > 0.0);
        assert_eq!(out.position.y, 0.0);
    }

    #[test]
    fn sustained_upward_force_lands_and_freezes_output() {
        let mut c = engaged(AdmittanceGains::default(), no_deadband());
        push_x(&mut c, 2.0, 50);
        let before = c.output();
        let ground = Wrench::new(Vector3::new(2.0, 0.0, 30.0), 0.0);
        let mut landed_at = None;
        for k in 1..=100 {
            if let (_, Some(t)) = c.tick(&ReferencePose::default(), &ground, true) {
                assert_eq!(t.trigger, Trigger::LandingDetected);
                landed_at = Some(k);
            }
        }
        assert_eq!(landed_at, Some(50));
        assert_eq!(c.mode(), Mode::Landed);
        let frozen = c.output();
        assert_ne!(frozen, before);
        for _ in 0..100 {
            let out = c.tick(&ReferencePose::default(), &Wrench::new(Vector3::x() * 9.0, 0.0), true).0;
            assert_eq!(out, frozen);
        }
    }

    #[test]
    fn offset_mean_of_constant_bias() {
        let bias = Wrench::new(Vector3::new(0.3, -0.2, 0.1), 0.0);
        let off = calibrate_offset(&vec![bias; 37]).unwrap();
        assert_relative_eq!(off.force, bias.force, epsilon = 1e-15);
        assert_eq!(calibrate_offset(&[]), Err(AdmittanceError::EmptyWindow));
    }

    #[test]
    fn offset_of_zero_mean_noise_is_small() {
        let sigma = 0.4;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = Normal::new(0.0, sigma).unwrap();
        let samples: Vec<Wrench> = (0..400)
            .map(|_| {
                Wrench::new(
                    Vector3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng)),
                    0.0,
                )
            })
            .collect();
        let off = calibrate_offset(&samples).unwrap();
        // Per-axis bound 3 sigma / sqrt(N).
        for i in 0..3 {
            assert!(off.force[i].abs() < 3.0 * sigma / 20.0);
        }
    }

    #[test]
    fn landing_detection_cases() {
        let cfg = FsmConfig {
            landing_force: 10.0,
            landing_angle: 20f64.to_radians(),
            t_landing: 0.5,
            ..FsmConfig::default()
        };
        let up = Wrench::new(Vector3::new(0.0, 0.0, 15.0), 0.0);
        assert!(detect_landing(&up, &cfg, 1.0));
        assert!(!detect_landing(&up, &cfg, 0.3));
        assert!(!detect_landing(&Wrench::new(Vector3::new(15.0, 0.0, 0.0), 0.0), &cfg, 1.0));
        assert!(!detect_landing(&Wrench::new(Vector3::new(0.0, 0.0, -15.0), 0.0), &cfg, 1.0));
        assert!(!detect_landing(&Wrench::new(Vector3::new(0.0, 0.0, 9.0), 0.0), &cfg, 1.0));

        // 0.3 s of contact then release never lands.
        let mut c = engaged(AdmittanceGains::default(), cfg);
        for _ in 0..30 {
            c.tick(&ReferencePose::default(), &up, true);
        }
        for _ in 0..100 {
            c.tick(&ReferencePose::default(), &Wrench::zero(), true);
        }
        assert_eq!(c.mode(), Mode::Engaged);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in [Mode::Disengaged, Mode::Calibrating, Mode::Engaged, Mode::Landed] {
            assert_eq!(Mode::from_name(m.name()), Some(m));
        }
        assert_eq!(Mode::from_name("flying"), None);
    }
}

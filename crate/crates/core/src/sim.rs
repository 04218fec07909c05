//! Deterministic fixed-timestep orchestration of two coupled agents.
//!
//! Each tick runs the same pipeline in a fixed order:
//!
//! 1. the coupling node reads agent states delayed by `latency_ticks`
//!    (plus optional sensor noise on that delayed copy),
//! 2. desired coupling torques are computed from those states,
//! 3. the rendering stage produces applied torques against each user's
//!    *current* joint speeds,
//! 4. the tick is logged (pre-integration states, torques, swing-ankle
//!    positions, stance assignment),
//! 5. both agents integrate one step under the applied torques,
//! 6. reference-cycle wrap and limit-saturation events are appended.
//!
//! The only randomness is the optional initial phase jitter and sensor
//! noise, both drawn from a counter-based generator seeded with
//! [`Scenario::seed`]; with both at zero the seed has no effect and two runs
//! of the same scenario are bit-identical.

use std::collections::VecDeque;

use nalgebra::{SVector, Vector2, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coupling::{
    couple, render_detailed, CouplingConfig, RenderLimits, TorqueCommand, TorqueVec, SAT_POWER,
    SAT_TORQUE, SAT_VELOCITY,
};
use crate::error::{Error, Result};
use crate::model::{
    designated_stance, forward_kinematics, gait_reference, hip_position, initial_state, leg_ik,
    phase_rate, step_with_reference, AgentState, GaitPattern, ImpedanceParams, SegmentParams,
    DEFAULT_DT,
};
use crate::types::{Side, UserId};

/// Joint speed (rad/s) beyond which the trial aborts as numerically blown up.
pub const ABORT_QDOT: f64 = 50.0;

/// Treadmill speed (km/h) at which gait patterns run at their configured
/// cadence; other speeds scale the cadence proportionally.
pub const DEFAULT_TREADMILL_SPEED: f64 = 0.8;

/// One user's physical and control parameters plus initial condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub segments: SegmentParams,
    pub gait: GaitPattern,
    pub impedance: ImpedanceParams,
    /// Gait phase at t = 0.
    pub initial_phase: f64,
    /// Constant torso pitch, radians.
    pub torso_pitch: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            segments: SegmentParams::default(),
            gait: GaitPattern::default(),
            impedance: ImpedanceParams::default(),
            initial_phase: 0.0,
            torso_pitch: 0.0,
        }
    }
}

/// Scripted reference override for one user, on top of the gait pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Maneuver {
    /// Ramp the user's swing ankle vertically by `rise` meters over
    /// `ramp_duration` seconds (smoothstep), then hold. The swing-leg
    /// reference comes from inverse kinematics; the stance leg keeps its
    /// gait reference.
    VerticalReach {
        user: UserId,
        rise: f64,
        ramp_duration: f64,
    },
}

/// Complete description of one trial. Equal scenarios produce bit-identical
/// logs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// Condition name used in summary tables and output paths.
    pub label: String,
    /// Trial length, seconds. The log holds `floor(duration / dt)` ticks.
    pub duration: f64,
    /// Timestep, seconds.
    pub dt: f64,
    /// Communication delay between the users' sensors and the coupling
    /// node, in whole ticks.
    pub latency_ticks: usize,
    /// The two users, indexed A = 0, B = 1.
    pub agents: [AgentConfig; 2],
    pub coupling: CouplingConfig,
    pub limits: RenderLimits,
    /// km/h; scales both users' cadence relative to
    /// [`DEFAULT_TREADMILL_SPEED`].
    pub treadmill_speed: f64,
    pub seed: u64,
    /// Half-width of the uniform perturbation added to each initial phase.
    pub phase_jitter: f64,
    /// Half-width of the uniform noise (rad, rad/s) added to the joint
    /// states the coupling node sees.
    pub sensor_noise: f64,
    /// Fix the stance leg for both users instead of deriving it from phase.
    pub stance_override: Option<Side>,
    pub maneuver: Option<Maneuver>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            label: "custom".to_string(),
            duration: 60.0,
            dt: DEFAULT_DT,
            latency_ticks: 0,
            agents: [AgentConfig::default(), AgentConfig::default()],
            coupling: CouplingConfig::default(),
            limits: RenderLimits::default(),
            treadmill_speed: DEFAULT_TREADMILL_SPEED,
            seed: 0,
            phase_jitter: 0.0,
            sensor_noise: 0.0,
            stance_override: None,
            maneuver: None,
        }
    }
}

impl Scenario {
    /// Number of ticks a full trial records: `floor(duration / dt)`.
    pub fn tick_count(&self) -> usize {
        // the tiny relative nudge keeps exact multiples (60 / 0.003) from
        // landing a hair below the integer
        ((self.duration / self.dt) * (1.0 + 1e-12)).floor() as usize
    }
}

/// Everything recorded about one tick, before integration.
#[derive(Clone, Debug, PartialEq)]
pub struct TickRecord {
    /// Tick start time, seconds.
    pub t: f64,
    pub states: [AgentState; 2],
    pub torques: [TorqueCommand; 2],
    /// Swing-ankle position of each user in their stance-ankle frame, m.
    pub r: [Vector2<f64>; 2],
    /// Designated stance leg of each user.
    pub stance: [Side; 2],
}

/// Which rendering limit a saturation event refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SatKind {
    Torque,
    Power,
    Velocity,
}

/// Discrete events detected while stepping.
#[derive(Clone, Debug, PartialEq)]
pub enum EventKind {
    /// One leg's reference cycle wrapped through its start (the commanded
    /// heel strike of that leg).
    ReferenceStrike { user: UserId, side: Side },
    /// A rendered torque component started clipping against a limit.
    /// `component` indexes the rendered vector: joints 0..4 in joint space;
    /// in task space 0 is the backpack and 1..5 the joints.
    Saturation {
        user: UserId,
        component: usize,
        kind: SatKind,
    },
}

/// An event and the tick whose record it belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub tick: usize,
    pub kind: EventKind,
}

/// Complete record of one trial: every tick plus the event list.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialLog {
    pub scenario: Scenario,
    pub records: Vec<TickRecord>,
    pub events: Vec<Event>,
}

impl TrialLog {
    pub fn dt(&self) -> f64 {
        self.scenario.dt
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Cubic smoothstep: 0 below 0, 1 above 1, `x^2 (3 - 2x)` in between.
pub fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Validation outcome: hard violations and advisory warnings.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_finite(report: &mut ValidationReport, what: &str, vals: &[f64]) {
    if vals.iter().any(|v| !v.is_finite()) {
        report.violations.push(format!("{what} must be finite"));
    }
}

/// Check every configuration invariant without running anything.
pub fn validate_scenario(scenario: &Scenario) -> ValidationReport {
    let mut report = ValidationReport::default();

    if !(scenario.duration > 0.0) || !scenario.duration.is_finite() {
        report.violations.push(format!(
            "duration must be positive and finite (got {})",
            scenario.duration
        ));
    }
    if !(scenario.dt > 0.0) || !scenario.dt.is_finite() {
        report
            .violations
            .push(format!("dt must be positive and finite (got {})", scenario.dt));
    }
    if !(scenario.treadmill_speed > 0.0) || !scenario.treadmill_speed.is_finite() {
        report.violations.push(format!(
            "treadmill_speed must be positive (got {})",
            scenario.treadmill_speed
        ));
    }
    if scenario.phase_jitter < 0.0 {
        report
            .violations
            .push("phase_jitter must be non-negative".to_string());
    }
    if scenario.sensor_noise < 0.0 {
        report
            .violations
            .push("sensor_noise must be non-negative".to_string());
    }

    for (i, agent) in scenario.agents.iter().enumerate() {
        let who = ["A", "B"][i];
        let segs = [
            agent.segments.left.thigh_len,
            agent.segments.left.shank_len,
            agent.segments.right.thigh_len,
            agent.segments.right.shank_len,
        ];
        if segs.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            report
                .violations
                .push(format!("agents[{who}].segments lengths must be positive"));
        }
        if !(agent.gait.cadence > 0.0) || !agent.gait.cadence.is_finite() {
            report.violations.push(format!(
                "agents[{who}].gait.cadence must be positive (got {})",
                agent.gait.cadence
            ));
        }
        check_finite(
            &mut report,
            &format!("agents[{who}].gait.rom_scale"),
            &agent.gait.rom_scale,
        );
        if agent.gait.rom_scale.iter().any(|&r| r < 0.0) {
            report
                .violations
                .push(format!("agents[{who}].gait.rom_scale must be non-negative"));
        }
        if agent.gait.entrain_gain < 0.0 {
            report
                .violations
                .push(format!("agents[{who}].gait.entrain_gain must be non-negative"));
        }
        let imp = &agent.impedance;
        for j in 0..4 {
            if imp.kp[j] < 0.0 {
                report
                    .violations
                    .push(format!("agents[{who}].impedance.kp[{j}] must be non-negative"));
            }
            if imp.kd[j] < 0.0 {
                report.violations.push(format!(
                    "agents[{who}].impedance.kd[{j}] is negative; damping must be non-negative"
                ));
            }
            if imp.viscous[j] < 0.0 {
                report.violations.push(format!(
                    "agents[{who}].impedance.viscous[{j}] is negative; damping must be non-negative"
                ));
            }
            if !(imp.inertia[j] > 0.0) {
                report
                    .violations
                    .push(format!("agents[{who}].impedance.inertia[{j}] must be positive"));
            }
            if !(imp.q_min[j] < imp.q_max[j]) {
                report.violations.push(format!(
                    "agents[{who}].impedance joint limits require q_min[{j}] < q_max[{j}]"
                ));
            }
        }
        check_finite(&mut report, &format!("agents[{who}].impedance.kp"), &imp.kp);
        check_finite(&mut report, &format!("agents[{who}].impedance.kd"), &imp.kd);

        // the knee reference should stay above the knee's hard stop, or the
        // surrogate fights the clamp every cycle
        let knee_rom = agent.gait.rom_scale[1].max(agent.gait.rom_scale[3]);
        if agent.gait.knee.offset - knee_rom * agent.gait.knee.amplitude < imp.q_min[1] {
            report.warnings.push(format!(
                "agents[{who}]: knee reference dips below the knee's lower limit and will clamp"
            ));
        }
    }

    report.violations.extend(scenario.coupling.violations());
    report.warnings.extend(scenario.coupling.warnings());
    report.violations.extend(scenario.limits.violations());

    if let Some(Maneuver::VerticalReach {
        rise,
        ramp_duration,
        ..
    }) = &scenario.maneuver
    {
        if !rise.is_finite() {
            report
                .violations
                .push("maneuver.rise must be finite".to_string());
        }
        if !(*ramp_duration > 0.0) {
            report
                .violations
                .push("maneuver.ramp_duration must be positive".to_string());
        }
    }

    report
}

/// Live trial state. Build with [`build_world`], advance with
/// [`World::step`], extract the log with [`World::into_log`].
pub struct World {
    scenario: Scenario,
    /// Gait patterns with treadmill-scaled cadence.
    patterns: [GaitPattern; 2],
    states: [AgentState; 2],
    prev_applied: [TorqueVec; 2],
    prev_sat: [[u8; 5]; 2],
    delay: VecDeque<[AgentState; 2]>,
    rng: Option<ChaCha8Rng>,
    tick: usize,
    records: Vec<TickRecord>,
    events: Vec<Event>,
}

/// Construct the initial world: agents posed on their gait reference at the
/// configured (optionally jittered) phase, latency buffer pre-filled with
/// the initial states, renderer state zeroed.
pub fn build_world(scenario: &Scenario) -> Result<World> {
    let report = validate_scenario(scenario);
    if !report.is_clean() {
        return Err(Error::Scenario(report.violations.join("; ")));
    }

    let scale = scenario.treadmill_speed / DEFAULT_TREADMILL_SPEED;
    let patterns = [0, 1].map(|i| {
        let mut p = scenario.agents[i].gait.clone();
        p.cadence *= scale;
        p
    });

    // a generator is created only when some randomness is configured, so
    // fully deterministic scenarios ignore the seed entirely
    let mut rng = if scenario.phase_jitter > 0.0 || scenario.sensor_noise > 0.0 {
        Some(ChaCha8Rng::seed_from_u64(scenario.seed))
    } else {
        None
    };

    let mut phases = [0.0; 2];
    for i in 0..2 {
        phases[i] = scenario.agents[i].initial_phase;
        if scenario.phase_jitter > 0.0 {
            let r = rng.as_mut().unwrap();
            phases[i] += scenario.phase_jitter * r.random_range(-1.0..1.0);
        }
    }
    let states =
        [0, 1].map(|i| initial_state(phases[i], &patterns[i], scenario.agents[i].torso_pitch));

    if scenario.sensor_noise == 0.0 {
        rng = None;
    }

    let mut delay = VecDeque::with_capacity(scenario.latency_ticks + 1);
    for _ in 0..scenario.latency_ticks {
        delay.push_back(states.clone());
    }

    let space = scenario.coupling.space;
    Ok(World {
        scenario: scenario.clone(),
        patterns,
        states,
        prev_applied: [TorqueVec::zeros_like(space), TorqueVec::zeros_like(space)],
        prev_sat: [[0; 5]; 2],
        delay,
        rng,
        tick: 0,
        records: Vec::with_capacity(scenario.tick_count()),
        events: Vec::new(),
    })
}

impl World {
    pub fn state(&self, user: UserId) -> &AgentState {
        &self.states[user.index()]
    }

    pub fn tick(&self) -> usize {
        self.tick
    }

    pub fn into_log(self) -> TrialLog {
        TrialLog {
            scenario: self.scenario,
            records: self.records,
            events: self.events,
        }
    }

    fn stance_of(&self, phase: f64) -> Side {
        self.scenario
            .stance_override
            .unwrap_or_else(|| designated_stance(phase))
    }

    /// Advance one tick: couple, render, log, integrate, detect events.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.scenario.dt;
        let t = self.tick as f64 * dt;

        // states the coupling node sees: delayed, optionally noisy
        self.delay.push_back(self.states.clone());
        let mut seen = self.delay.pop_front().expect("delay buffer is never empty");
        if let Some(rng) = self.rng.as_mut() {
            let amp = self.scenario.sensor_noise;
            for s in seen.iter_mut() {
                for j in 0..4 {
                    s.q[j] += rng.random_range(-amp..amp);
                    s.qdot[j] += rng.random_range(-amp..amp);
                }
            }
        }

        let stance_seen = [
            self.stance_of(seen[0].phase),
            self.stance_of(seen[1].phase),
        ];
        let stance_now = [
            self.stance_of(self.states[0].phase),
            self.stance_of(self.states[1].phase),
        ];

        let (des_a, des_b) = couple(
            &seen[0],
            &seen[1],
            Some(stance_seen),
            &self.scenario.coupling,
            &self.scenario.agents[0].segments,
            &self.scenario.agents[1].segments,
        )?;
        let desired = [des_a, des_b];

        let mut commands: Vec<TorqueCommand> = Vec::with_capacity(2);
        for (i, user) in UserId::BOTH.into_iter().enumerate() {
            let (applied, sat) = match (&desired[i], &mut self.prev_applied[i]) {
                (TorqueVec::Joint(des), TorqueVec::Joint(prev)) => {
                    let (out, sat) =
                        render_detailed(des, &self.states[i].qdot, &self.scenario.limits, prev, dt)?;
                    *prev = out;
                    let mut sat5 = [0u8; 5];
                    sat5[..4].copy_from_slice(&sat);
                    (TorqueVec::Joint(out), sat5)
                }
                (TorqueVec::Task(des), TorqueVec::Task(prev)) => {
                    let (out, sat) = render_detailed(
                        des,
                        &self.states[i].gen_dot(),
                        &self.scenario.limits,
                        prev,
                        dt,
                    )?;
                    *prev = out;
                    (TorqueVec::Task(out), sat)
                }
                _ => unreachable!("renderer state always matches the coupling space"),
            };
            self.note_saturation(user, &sat);
            commands.push(TorqueCommand {
                user,
                tau_des: desired[i].clone(),
                tau_applied: applied,
            });
        }
        let commands: [TorqueCommand; 2] = [commands.remove(0), commands.remove(0)];

        let r = [
            forward_kinematics(
                &self.states[0].gen(),
                stance_now[0].other(),
                &self.scenario.agents[0].segments,
            )?,
            forward_kinematics(
                &self.states[1].gen(),
                stance_now[1].other(),
                &self.scenario.agents[1].segments,
            )?,
        ];

        self.records.push(TickRecord {
            t,
            states: self.states.clone(),
            torques: commands.clone(),
            r,
            stance: stance_now,
        });

        // integrate
        for (i, user) in UserId::BOTH.into_iter().enumerate() {
            let pattern = &self.patterns[i];
            let tau = commands[i].tau_applied.actuated();
            let (mut q_ref, mut qdot_ref) = gait_reference(self.states[i].phase, pattern);

            if let Some(Maneuver::VerticalReach {
                user: mu,
                rise,
                ramp_duration,
            }) = &self.scenario.maneuver
            {
                if *mu == user {
                    let segs = &self.scenario.agents[i].segments;
                    let stance = stance_now[i];
                    let swing = stance.other();
                    let phi = self.states[i].phi;
                    let mut gen_ref = SVector::<f64, 5>::zeros();
                    gen_ref[0] = phi;
                    for j in 0..4 {
                        gen_ref[1 + j] = q_ref[j];
                    }
                    let base = forward_kinematics(&gen_ref, swing, segs)?;
                    let target =
                        base + Vector2::new(0.0, rise * smoothstep(t / ramp_duration));
                    let hip = hip_position(
                        phi,
                        q_ref[stance.hip()],
                        q_ref[stance.knee()],
                        segs.leg(stance),
                    );
                    let (hip_q, knee_q) = leg_ik(target - hip, segs.leg(swing), phi);
                    q_ref[swing.hip()] = hip_q;
                    q_ref[swing.knee()] = knee_q;
                    qdot_ref = Vector4::zeros();
                }
            }

            let rate = phase_rate(pattern, &tau, &qdot_ref);
            let old_phase = self.states[i].phase;
            self.states[i] = step_with_reference(
                &self.states[i],
                &tau,
                &q_ref,
                &qdot_ref,
                rate,
                pattern.phase_offset_right,
                &self.scenario.agents[i].impedance,
                dt,
            );

            // reference-cycle wraps (rate is always positive)
            let new_phase = self.states[i].phase;
            for side in Side::BOTH {
                let off = match side {
                    Side::Left => 0.0,
                    Side::Right => pattern.phase_offset_right,
                };
                let before = (old_phase + off).rem_euclid(1.0);
                let after = (new_phase + off).rem_euclid(1.0);
                if after < before {
                    self.events.push(Event {
                        tick: self.tick,
                        kind: EventKind::ReferenceStrike { user, side },
                    });
                }
            }

            for j in 0..4 {
                let w = self.states[i].qdot[j];
                if !(w.abs() <= ABORT_QDOT) {
                    return Err(Error::Aborted {
                        tick: self.tick,
                        time: t + dt,
                        reason: format!(
                            "user {user} joint {j} speed reached {w:.2} rad/s (limit {ABORT_QDOT})"
                        ),
                    });
                }
            }
        }

        self.tick += 1;
        Ok(())
    }

    /// Emit saturation events on rising edges of each limit flag. Joint-space
    /// flags arrive padded to 5 with the unused slot zero.
    fn note_saturation(&mut self, user: UserId, sat: &[u8; 5]) {
        let prev = &mut self.prev_sat[user.index()];
        for (j, &flags) in sat.iter().enumerate() {
            for (bit, kind) in [
                (SAT_TORQUE, SatKind::Torque),
                (SAT_POWER, SatKind::Power),
                (SAT_VELOCITY, SatKind::Velocity),
            ] {
                if flags & bit != 0 && prev[j] & bit == 0 {
                    self.events.push(Event {
                        tick: self.tick,
                        kind: EventKind::Saturation {
                            user,
                            component: j,
                            kind,
                        },
                    });
                }
            }
            prev[j] = flags;
        }
    }
}

/// Run a scenario to completion and return the full log.
pub fn run_trial(scenario: &Scenario) -> Result<TrialLog> {
    let mut world = build_world(scenario)?;
    let n = scenario.tick_count();
    for _ in 0..n {
        world.step()?;
    }
    Ok(world.into_log())
}

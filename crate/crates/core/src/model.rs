//! Planar leg kinematics and the impedance-controlled gait surrogate.
//!
//! Conventions used everywhere downstream:
//!
//! * Generalized coordinates are `[phi, hipL, kneeL, hipR, kneeR]` where
//!   `phi` is torso pitch (0 = vertical, positive = forward lean).
//! * Hip flexion is positive forward; knee 0 = straight, flexion positive.
//! * The stance ankle is the origin of the ground frame, x forward, y up.
//! * A segment with absolute angle `theta` points along
//!   `(sin theta, -cos theta)` from proximal to distal; the thigh's absolute
//!   angle is `phi + q_hip` and the shank's is the thigh's minus `q_knee`.

use nalgebra::{SMatrix, SVector, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{to_rad, Side};

/// Generalized coordinate vector `[phi, hipL, kneeL, hipR, kneeR]`.
pub type Gen = SVector<f64, 5>;

/// Default control / physics timestep in seconds (about 333 Hz).
pub const DEFAULT_DT: f64 = 0.003;

/// Derivative gain ratio used by the default impedance: kd = RATIO * sqrt(kp * I).
pub const KD_RATIO: f64 = 1.6;

/// Fraction of each leg's own gait cycle spent in stance.
pub const STANCE_WINDOW: f64 = 0.6;

/// Thigh and shank lengths of one leg, meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegSegments {
    pub thigh_len: f64,
    pub shank_len: f64,
}

/// Segment lengths for both legs of one user.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentParams {
    pub left: LegSegments,
    pub right: LegSegments,
}

impl SegmentParams {
    pub fn uniform(thigh_len: f64, shank_len: f64) -> Self {
        let leg = LegSegments {
            thigh_len,
            shank_len,
        };
        SegmentParams {
            left: leg,
            right: leg,
        }
    }

    pub fn leg(&self, side: Side) -> LegSegments {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams::uniform(0.45, 0.45)
    }
}

/// Which leg(s) carry weight, derived from the gait phase windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    LeftStance,
    RightStance,
    Double,
}

/// Full kinematic state of one user.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentState {
    /// Torso pitch, radians. Constant during a trial.
    pub phi: f64,
    /// Joint angles `[hipL, kneeL, hipR, kneeR]`, radians.
    pub q: Vector4<f64>,
    /// Joint velocities, rad/s.
    pub qdot: Vector4<f64>,
    /// Gait phase in `[0, 1)`.
    pub phase: f64,
    pub support: Support,
}

impl AgentState {
    /// Generalized coordinates `[phi, q]`.
    pub fn gen(&self) -> Gen {
        SVector::<f64, 5>::new(self.phi, self.q[0], self.q[1], self.q[2], self.q[3])
    }

    /// Generalized velocities `[0, qdot]` (`phi` has no dynamics).
    pub fn gen_dot(&self) -> Gen {
        SVector::<f64, 5>::new(0.0, self.qdot[0], self.qdot[1], self.qdot[2], self.qdot[3])
    }
}

/// One raised-cosine bump, periodic in phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    /// Phase of the bump's peak.
    pub center: f64,
    /// Full width of the bump's support, in phase.
    pub width: f64,
    /// Peak height before normalization.
    pub height: f64,
}

/// Normalized periodic shape functions spanning exactly [-1, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveShape {
    /// `cos(2 pi (phase - peak))`.
    Cosine { peak: f64 },
    /// Sum of raised-cosine bumps, rescaled so the tallest peak maps to +1
    /// and the zero baseline to -1. Assumes bump supports do not overlap at
    /// their peaks.
    Bumps { bumps: Vec<Bump> },
}

impl CurveShape {
    /// Shape value and its derivative with respect to phase.
    pub fn eval(&self, phase: f64) -> (f64, f64) {
        match self {
            CurveShape::Cosine { peak } => {
                let a = 2.0 * std::f64::consts::PI * (phase - peak);
                (a.cos(), -2.0 * std::f64::consts::PI * a.sin())
            }
            CurveShape::Bumps { bumps } => {
                let mut raw = 0.0;
                let mut draw = 0.0;
                let mut max_h = 0.0f64;
                for b in bumps {
                    let (v, dv) = bump_eval(phase, b.center, b.width);
                    raw += b.height * v;
                    draw += b.height * dv;
                    max_h = max_h.max(b.height);
                }
                if max_h == 0.0 {
                    return (0.0, 0.0);
                }
                (2.0 * raw / max_h - 1.0, 2.0 * draw / max_h)
            }
        }
    }
}

/// Raised cosine on a periodic axis: value and d/dphase.
fn bump_eval(phase: f64, center: f64, width: f64) -> (f64, f64) {
    let mut d = (phase - center).rem_euclid(1.0);
    if d > 0.5 {
        d -= 1.0;
    }
    if d.abs() > width / 2.0 {
        return (0.0, 0.0);
    }
    let u = 2.0 * std::f64::consts::PI * d / width;
    (
        0.5 * (1.0 + u.cos()),
        -std::f64::consts::PI / width * u.sin(),
    )
}

/// Reference curve of one joint: `offset + rom * amplitude * shape(phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointCurve {
    pub offset: f64,
    pub amplitude: f64,
    pub shape: CurveShape,
}

/// Default hip reference: 12.5 deg +- 22.5 deg, peak flexion late in the cycle.
pub fn default_hip_curve() -> JointCurve {
    JointCurve {
        offset: to_rad(12.5),
        amplitude: to_rad(22.5),
        shape: CurveShape::Cosine { peak: 0.9 },
    }
}

/// Default knee reference: stance flexion bump plus a large swing flexion
/// bump, spanning [8 deg, 65 deg].
pub fn default_knee_curve() -> JointCurve {
    JointCurve {
        offset: to_rad(36.5),
        amplitude: to_rad(28.5),
        shape: CurveShape::Bumps {
            bumps: vec![
                Bump {
                    center: 0.12,
                    width: 0.30,
                    height: 0.25,
                },
                Bump {
                    center: 0.72,
                    width: 0.50,
                    height: 1.0,
                },
            ],
        },
    }
}

/// Periodic gait intent of one user.
///
/// The right leg runs the same curves shifted by `phase_offset_right`.
/// `rom_scale` multiplies each joint's amplitude: `[hipL, kneeL, hipR, kneeR]`.
///
/// `entrain_gain` adds a phase-rate feedback: the phase advances at
/// `cadence * (1 + entrain_gain * tanh(P / entrain_power))` where
/// `P = tau_applied . qdot_ref` is the power the coupling injects along the
/// reference motion. With the default gain of 0 (or zero applied torque) the
/// phase advances at exactly the cadence rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaitPattern {
    /// Strides per second.
    pub cadence: f64,
    pub hip: JointCurve,
    pub knee: JointCurve,
    pub rom_scale: [f64; 4],
    pub phase_offset_right: f64,
    pub entrain_gain: f64,
    /// Power scale (W) of the tanh in the phase-rate feedback.
    pub entrain_power: f64,
}

impl Default for GaitPattern {
    fn default() -> Self {
        GaitPattern {
            cadence: 0.6,
            hip: default_hip_curve(),
            knee: default_knee_curve(),
            rom_scale: [1.0; 4],
            phase_offset_right: 0.5,
            entrain_gain: 0.0,
            entrain_power: 3.0,
        }
    }
}

/// Per-joint impedance of the gait surrogate, plus its joint limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImpedanceParams {
    /// Stiffness toward the reference, Nm/rad.
    pub kp: [f64; 4],
    /// Damping toward the reference velocity, Nms/rad.
    pub kd: [f64; 4],
    /// Joint inertia, kg m^2.
    pub inertia: [f64; 4],
    /// Absolute viscous friction, Nms/rad.
    pub viscous: [f64; 4],
    /// Hard joint limits, radians.
    pub q_min: [f64; 4],
    pub q_max: [f64; 4],
}

impl ImpedanceParams {
    /// Uniform stiffness with critical-ish damping `kd = 1.6 sqrt(kp I)` and
    /// the default inertias and limits.
    pub fn with_kp(kp: f64) -> Self {
        let inertia = [1.2, 0.35, 1.2, 0.35];
        let mut kd = [0.0; 4];
        for j in 0..4 {
            kd[j] = KD_RATIO * (kp * inertia[j]).sqrt();
        }
        ImpedanceParams {
            kp: [kp; 4],
            kd,
            inertia,
            viscous: [0.3; 4],
            q_min: [to_rad(-30.0), 0.0, to_rad(-30.0), 0.0],
            q_max: [to_rad(120.0), to_rad(135.0), to_rad(120.0), to_rad(135.0)],
        }
    }
}

impl Default for ImpedanceParams {
    fn default() -> Self {
        ImpedanceParams::with_kp(100.0)
    }
}

fn seg_dir(theta: f64) -> Vector2<f64> {
    Vector2::new(theta.sin(), -theta.cos())
}

fn seg_dir_d(theta: f64) -> Vector2<f64> {
    Vector2::new(theta.cos(), theta.sin())
}

/// Swing-ankle position in the stance-ankle ground frame.
pub fn forward_kinematics(gen: &Gen, swing: Side, segs: &SegmentParams) -> Result<Vector2<f64>> {
    if !gen.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("forward_kinematics input"));
    }
    let stance = swing.other();
    let st = segs.leg(stance);
    let sw = segs.leg(swing);
    let phi = gen[0];

    let th_t_st = phi + gen[1 + stance.hip()];
    let th_s_st = th_t_st - gen[1 + stance.knee()];
    let hip = -st.shank_len * seg_dir(th_s_st) - st.thigh_len * seg_dir(th_t_st);

    let th_t_sw = phi + gen[1 + swing.hip()];
    let th_s_sw = th_t_sw - gen[1 + swing.knee()];
    Ok(hip + sw.thigh_len * seg_dir(th_t_sw) + sw.shank_len * seg_dir(th_s_sw))
}

/// Jacobian of the swing-ankle position with respect to the generalized
/// coordinates, columns `[phi, hipL, kneeL, hipR, kneeR]`.
pub fn swing_jacobian(gen: &Gen, swing: Side, segs: &SegmentParams) -> Result<SMatrix<f64, 2, 5>> {
    if !gen.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("swing_jacobian input"));
    }
    let stance = swing.other();
    let st = segs.leg(stance);
    let sw = segs.leg(swing);
    let phi = gen[0];

    let th_t_st = phi + gen[1 + stance.hip()];
    let th_s_st = th_t_st - gen[1 + stance.knee()];
    let th_t_sw = phi + gen[1 + swing.hip()];
    let th_s_sw = th_t_sw - gen[1 + swing.knee()];

    // derivative of the hip position through the stance chain, and of the
    // swing chain relative to the hip
    let d_st = -st.shank_len * seg_dir_d(th_s_st) - st.thigh_len * seg_dir_d(th_t_st);
    let d_sw = sw.thigh_len * seg_dir_d(th_t_sw) + sw.shank_len * seg_dir_d(th_s_sw);

    let mut j = SMatrix::<f64, 2, 5>::zeros();
    j.set_column(0, &(d_st + d_sw));
    j.set_column(1 + stance.hip(), &d_st);
    j.set_column(1 + stance.knee(), &(st.shank_len * seg_dir_d(th_s_st)));
    j.set_column(1 + swing.hip(), &d_sw);
    j.set_column(1 + swing.knee(), &(-sw.shank_len * seg_dir_d(th_s_sw)));
    Ok(j)
}

/// Reference joint angles and velocities at a gait phase.
///
/// The velocity is the analytic time derivative at the nominal cadence.
pub fn gait_reference(phase: f64, pattern: &GaitPattern) -> (Vector4<f64>, Vector4<f64>) {
    let mut q = Vector4::zeros();
    let mut qd = Vector4::zeros();
    for side in Side::BOTH {
        let p = match side {
            Side::Left => phase.rem_euclid(1.0),
            Side::Right => (phase + pattern.phase_offset_right).rem_euclid(1.0),
        };
        let (sh, dsh) = pattern.hip.shape.eval(p);
        let (sk, dsk) = pattern.knee.shape.eval(p);
        let rom_h = pattern.rom_scale[side.hip()];
        let rom_k = pattern.rom_scale[side.knee()];
        q[side.hip()] = pattern.hip.offset + rom_h * pattern.hip.amplitude * sh;
        q[side.knee()] = pattern.knee.offset + rom_k * pattern.knee.amplitude * sk;
        qd[side.hip()] = rom_h * pattern.hip.amplitude * dsh * pattern.cadence;
        qd[side.knee()] = rom_k * pattern.knee.amplitude * dsk * pattern.cadence;
    }
    (q, qd)
}

/// Leg in single stance implied by the gait phase windows.
fn leg_in_stance(phase: f64, pattern_offset: f64, side: Side) -> bool {
    let own = match side {
        Side::Left => phase.rem_euclid(1.0),
        Side::Right => (phase + pattern_offset).rem_euclid(1.0),
    };
    own < STANCE_WINDOW
}

/// Support classification from the per-leg stance windows `[0, 0.6)`.
pub fn support_from_phase(phase: f64, phase_offset_right: f64) -> Support {
    let left = leg_in_stance(phase, phase_offset_right, Side::Left);
    let right = leg_in_stance(phase, phase_offset_right, Side::Right);
    match (left, right) {
        (true, true) => Support::Double,
        (true, false) => Support::LeftStance,
        (false, true) => Support::RightStance,
        // no window active (possible for unusual offsets): fall back to the
        // designated stance leg
        (false, false) => match designated_stance(phase) {
            Side::Left => Support::LeftStance,
            Side::Right => Support::RightStance,
        },
    }
}

/// The single stance leg used for kinematics and logging: the leg whose own
/// phase is in the first half of its cycle (left wins during double support).
pub fn designated_stance(phase: f64) -> Side {
    if phase.rem_euclid(1.0) < 0.5 {
        Side::Left
    } else {
        Side::Right
    }
}

/// State on the reference trajectory at a given phase.
pub fn initial_state(phase: f64, pattern: &GaitPattern, phi: f64) -> AgentState {
    let phase = phase.rem_euclid(1.0);
    let (q, qdot) = gait_reference(phase, pattern);
    AgentState {
        phi,
        q,
        qdot,
        phase,
        support: support_from_phase(phase, pattern.phase_offset_right),
    }
}

/// Phase advance rate, including the optional entrainment feedback.
pub(crate) fn phase_rate(pattern: &GaitPattern, tau: &Vector4<f64>, qdot_ref: &Vector4<f64>) -> f64 {
    if pattern.entrain_gain > 0.0 {
        let p = tau.dot(qdot_ref);
        pattern.cadence * (1.0 + pattern.entrain_gain * (p / pattern.entrain_power).tanh())
    } else {
        pattern.cadence
    }
}

/// Semi-implicit Euler step against an explicit reference.
pub(crate) fn step_with_reference(
    state: &AgentState,
    tau: &Vector4<f64>,
    q_ref: &Vector4<f64>,
    qdot_ref: &Vector4<f64>,
    rate: f64,
    phase_offset_right: f64,
    imp: &ImpedanceParams,
    dt: f64,
) -> AgentState {
    let mut q = state.q;
    let mut qd = state.qdot;
    for j in 0..4 {
        let acc = (imp.kp[j] * (q_ref[j] - q[j]) + imp.kd[j] * (qdot_ref[j] - qd[j])
            - imp.viscous[j] * qd[j]
            + tau[j])
            / imp.inertia[j];
        qd[j] += dt * acc;
        q[j] += dt * qd[j];
        if q[j] < imp.q_min[j] {
            q[j] = imp.q_min[j];
            qd[j] = qd[j].max(0.0);
        }
        if q[j] > imp.q_max[j] {
            q[j] = imp.q_max[j];
            qd[j] = qd[j].min(0.0);
        }
    }
    let phase = (state.phase + rate * dt).rem_euclid(1.0);
    AgentState {
        phi: state.phi,
        q,
        qdot: qd,
        phase,
        support: support_from_phase(phase, phase_offset_right),
    }
}

/// Advance one user by one timestep under an applied torque.
///
/// Per-joint dynamics:
/// `inertia qddot = kp (q_ref - q) + kd (qdot_ref - qdot) - viscous qdot + tau`,
/// integrated with semi-implicit Euler, then hard-clamped to the joint limits
/// (velocity zeroed into the limit). The phase advances at the cadence rate
/// (see [`GaitPattern`] for the optional entrainment term) and wraps to
/// `[0, 1)`.
pub fn agent_step(
    state: &AgentState,
    tau_applied: &Vector4<f64>,
    pattern: &GaitPattern,
    imp: &ImpedanceParams,
    dt: f64,
) -> Result<AgentState> {
    if !tau_applied.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("tau_applied"));
    }
    if !(dt > 0.0) {
        return Err(Error::NotPositive {
            what: "dt",
            value: dt,
        });
    }
    let (q_ref, qdot_ref) = gait_reference(state.phase, pattern);
    let rate = phase_rate(pattern, tau_applied, &qdot_ref);
    Ok(step_with_reference(
        state,
        tau_applied,
        &q_ref,
        &qdot_ref,
        rate,
        pattern.phase_offset_right,
        imp,
        dt,
    ))
}

/// Planar two-link inverse kinematics: joint angles (hip, knee) placing the
/// ankle at `target` in the hip frame, for a leg hanging from a torso pitched
/// by `phi`. Targets beyond reach are clamped to the workspace boundary
/// direction.
pub fn leg_ik(target_from_hip: Vector2<f64>, leg: LegSegments, phi: f64) -> (f64, f64) {
    let lt = leg.thigh_len;
    let ls = leg.shank_len;
    let d2 = target_from_hip.norm_squared();
    let c = ((d2 - lt * lt - ls * ls) / (2.0 * lt * ls)).clamp(-1.0, 1.0);
    let knee = c.acos();
    let gamma = (ls * knee.sin()).atan2(lt + ls * knee.cos());
    let beta = target_from_hip.x.atan2(-target_from_hip.y);
    let th_thigh = beta + gamma;
    (th_thigh - phi, knee)
}

/// Hip position in the stance-ankle frame for a given stance-leg
/// configuration.
pub fn hip_position(phi: f64, q_hip: f64, q_knee: f64, leg: LegSegments) -> Vector2<f64> {
    let th_t = phi + q_hip;
    let th_s = th_t - q_knee;
    -leg.shank_len * seg_dir(th_s) - leg.thigh_len * seg_dir(th_t)
}

//! The virtual element connecting the two users, and the rendering stage
//! that turns desired coupling torques into applied ones.
//!
//! Sign convention: the raw spring-damper value is
//! `raw = K (qA - qB - q0) + C (qdA - qdB)`. The torque commanded to act ON
//! user A is `-raw` and on user B is `+raw`, i.e. the coupling is attractive
//! and pulls the two users toward the neutral offset `q0`. Task space works
//! the same at the force level with ankle positions in place of joint angles.

use nalgebra::{SVector, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{forward_kinematics, swing_jacobian, AgentState, SegmentParams};
use crate::types::{Side, UserId};

/// Coordinates the virtual element acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingSpace {
    /// Joint-angle differences, one spring-damper per joint.
    Joint,
    /// Swing-ankle position differences in the ground frame.
    Task,
}

/// Who feels the coupling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    Bidirectional,
    /// A is a transparent leader; only B feels the coupling.
    UniAToB,
    /// B is a transparent leader; only A feels the coupling.
    UniBToA,
    /// Both feel it, each through their own gain set.
    Asymmetric,
}

/// Alternate gains felt by one designated user in asymmetric mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymmetricGains {
    /// The user whose torque is computed from this gain set.
    pub user: UserId,
    pub k_joint: [f64; 4],
    pub c_joint: [f64; 4],
    pub k_task: [f64; 2],
    pub c_task: [f64; 2],
}

/// Virtual element configuration. Stiffness and damping matrices are
/// diagonal, stored as their diagonals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CouplingConfig {
    pub space: CouplingSpace,
    pub mode: CouplingMode,
    /// Joint-space stiffness diagonal, Nm/rad, `[hipL, kneeL, hipR, kneeR]`.
    pub k_joint: [f64; 4],
    /// Joint-space damping diagonal, Nms/rad.
    pub c_joint: [f64; 4],
    /// Neutral joint-angle offset `q0`, radians.
    pub q0: [f64; 4],
    /// Task-space stiffness diagonal (x, y), N/m.
    pub k_task: [f64; 2],
    /// Task-space damping diagonal, Ns/m.
    pub c_task: [f64; 2],
    /// Neutral ankle-position offset, meters.
    pub r0: [f64; 2],
    /// Alternate gain set for [`CouplingMode::Asymmetric`].
    pub asymmetric: Option<AsymmetricGains>,
    /// Opt-in flag for negative (repulsive) stiffness. No stability
    /// guarantee.
    pub competitive: bool,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        CouplingConfig {
            space: CouplingSpace::Joint,
            mode: CouplingMode::Bidirectional,
            k_joint: [0.0; 4],
            c_joint: [0.0; 4],
            q0: [0.0; 4],
            k_task: [0.0; 2],
            c_task: [0.0; 2],
            r0: [0.0; 2],
            asymmetric: None,
            competitive: false,
        }
    }
}

impl CouplingConfig {
    /// Uniform joint-space spring-damper on all four joints.
    pub fn joint_uniform(k: f64, c: f64) -> Self {
        CouplingConfig {
            space: CouplingSpace::Joint,
            k_joint: [k; 4],
            c_joint: [c; 4],
            ..Default::default()
        }
    }

    /// Invariant violations, as human-readable strings naming the field.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let neg_k = self.k_joint.iter().chain(self.k_task.iter()).any(|&k| k < 0.0)
            || self.asymmetric.as_ref().is_some_and(|a| {
                a.k_joint.iter().chain(a.k_task.iter()).any(|&k| k < 0.0)
            });
        if neg_k && !self.competitive {
            out.push(
                "coupling stiffness is negative; repulsive coupling requires the \
                 `competitive` flag"
                    .to_string(),
            );
        }
        let neg_c = self.c_joint.iter().chain(self.c_task.iter()).any(|&c| c < 0.0)
            || self.asymmetric.as_ref().is_some_and(|a| {
                a.c_joint.iter().chain(a.c_task.iter()).any(|&c| c < 0.0)
            });
        if neg_c {
            out.push("coupling damping must be non-negative".to_string());
        }
        if self.mode == CouplingMode::Asymmetric && self.asymmetric.is_none() {
            out.push("asymmetric mode requires the `asymmetric` gain set".to_string());
        }
        for v in self
            .k_joint
            .iter()
            .chain(self.c_joint.iter())
            .chain(self.q0.iter())
            .chain(self.k_task.iter())
            .chain(self.c_task.iter())
            .chain(self.r0.iter())
        {
            if !v.is_finite() {
                out.push("coupling gains must be finite".to_string());
                break;
            }
        }
        out
    }

    /// Non-fatal warnings (currently: competitive negative stiffness in use).
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let neg_k = self.k_joint.iter().chain(self.k_task.iter()).any(|&k| k < 0.0);
        if neg_k && self.competitive {
            out.push(
                "negative coupling stiffness enabled (competitive); \
                 no stability guarantee"
                    .to_string(),
            );
        }
        out
    }
}

/// Desired and rendered torque for one user at one tick.
#[derive(Clone, Debug, PartialEq)]
pub struct TorqueCommand {
    pub user: UserId,
    pub tau_des: TorqueVec,
    pub tau_applied: TorqueVec,
}

/// Coupling torque vector: 4 joints, or 5 generalized components in task
/// space where component 0 acts on the backpack (torso pitch).
#[derive(Clone, Debug, PartialEq)]
pub enum TorqueVec {
    Joint(Vector4<f64>),
    Task(SVector<f64, 5>),
}

impl TorqueVec {
    pub fn zeros_like(space: CouplingSpace) -> Self {
        match space {
            CouplingSpace::Joint => TorqueVec::Joint(Vector4::zeros()),
            CouplingSpace::Task => TorqueVec::Task(SVector::zeros()),
        }
    }

    /// The four actuated components (drops the backpack component in task
    /// space; it is logged but never applied to the dynamics).
    pub fn actuated(&self) -> Vector4<f64> {
        match self {
            TorqueVec::Joint(t) => *t,
            TorqueVec::Task(t) => Vector4::new(t[1], t[2], t[3], t[4]),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TorqueVec::Joint(_) => 4,
            TorqueVec::Task(_) => 5,
        }
    }

    pub fn component(&self, i: usize) -> f64 {
        match self {
            TorqueVec::Joint(t) => t[i],
            TorqueVec::Task(t) => t[i],
        }
    }
}

fn joint_raw(
    a: &AgentState,
    b: &AgentState,
    k: &[f64; 4],
    c: &[f64; 4],
    q0: &[f64; 4],
) -> Vector4<f64> {
    let mut raw = Vector4::zeros();
    for j in 0..4 {
        raw[j] = k[j] * (a.q[j] - b.q[j] - q0[j]) + c[j] * (a.qdot[j] - b.qdot[j]);
    }
    raw
}

/// Joint-space coupling torques for both users (bidirectional signs,
/// directionality not yet applied): `(-raw, +raw)` with
/// `raw = K (qA - qB - q0) + C (qdA - qdB)`.
pub fn joint_coupling(
    a: &AgentState,
    b: &AgentState,
    cfg: &CouplingConfig,
) -> Result<(Vector4<f64>, Vector4<f64>)> {
    if cfg.space != CouplingSpace::Joint {
        return Err(Error::SpaceMismatch { expected: "joint" });
    }
    let raw = joint_raw(a, b, &cfg.k_joint, &cfg.c_joint, &cfg.q0);
    Ok((-raw, raw))
}

/// Output of [`task_coupling`]: generalized torques for both users plus the
/// Cartesian forces they were mapped from.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskCouple {
    /// `J_A^T . force_a`, 5 components, component 0 = backpack.
    pub tau_a: SVector<f64, 5>,
    pub tau_b: SVector<f64, 5>,
    /// Force on user A's swing ankle, N.
    pub force_a: Vector2<f64>,
    pub force_b: Vector2<f64>,
}

/// Task-space coupling: a spring-damper between the two swing ankles,
/// mapped to generalized torques through each user's own swing Jacobian.
///
/// `stance` gives each user's designated stance leg; `None` is an error
/// because the ankle frame is undefined without one.
pub fn task_coupling(
    a: &AgentState,
    b: &AgentState,
    stance: Option<[Side; 2]>,
    cfg: &CouplingConfig,
    segs_a: &SegmentParams,
    segs_b: &SegmentParams,
) -> Result<TaskCouple> {
    if cfg.space != CouplingSpace::Task {
        return Err(Error::SpaceMismatch { expected: "task" });
    }
    let stance = stance.ok_or(Error::MissingStance)?;
    let swing = [stance[0].other(), stance[1].other()];

    let gen_a = a.gen();
    let gen_b = b.gen();
    let r_a = forward_kinematics(&gen_a, swing[0], segs_a)?;
    let r_b = forward_kinematics(&gen_b, swing[1], segs_b)?;
    let j_a = swing_jacobian(&gen_a, swing[0], segs_a)?;
    let j_b = swing_jacobian(&gen_b, swing[1], segs_b)?;
    let rdot_a = j_a * a.gen_dot();
    let rdot_b = j_b * b.gen_dot();

    let mut f = Vector2::zeros();
    for i in 0..2 {
        f[i] = cfg.k_task[i] * (r_a[i] - r_b[i] - cfg.r0[i])
            + cfg.c_task[i] * (rdot_a[i] - rdot_b[i]);
    }
    let force_a = -f;
    let force_b = f;
    Ok(TaskCouple {
        tau_a: j_a.transpose() * force_a,
        tau_b: j_b.transpose() * force_b,
        force_a,
        force_b,
    })
}

/// Torques recomputed with the asymmetric gain set, and who feels them.
#[derive(Clone, Debug)]
pub struct AlternateTorques<const N: usize> {
    pub user: UserId,
    pub tau_a: SVector<f64, N>,
    pub tau_b: SVector<f64, N>,
}

/// Apply the coupling mode to a pair of bidirectional torques.
///
/// Unidirectional modes zero the leader's torque. Asymmetric mode replaces
/// the designated user's torque with the one computed from the alternate
/// gain set (`alternate` is required then).
pub fn apply_directionality<const N: usize>(
    tau_a: &SVector<f64, N>,
    tau_b: &SVector<f64, N>,
    mode: CouplingMode,
    alternate: Option<&AlternateTorques<N>>,
) -> Result<(SVector<f64, N>, SVector<f64, N>)> {
    match mode {
        CouplingMode::Bidirectional => Ok((*tau_a, *tau_b)),
        CouplingMode::UniAToB => Ok((SVector::zeros(), *tau_b)),
        CouplingMode::UniBToA => Ok((*tau_a, SVector::zeros())),
        CouplingMode::Asymmetric => {
            let alt = alternate.ok_or(Error::MissingAsymmetricGains)?;
            match alt.user {
                UserId::A => Ok((alt.tau_a, *tau_b)),
                UserId::B => Ok((*tau_a, alt.tau_b)),
            }
        }
    }
}

/// Full coupling node evaluation: space-appropriate couple computation,
/// asymmetric recomputation when configured, then directionality.
pub fn couple(
    a: &AgentState,
    b: &AgentState,
    stance: Option<[Side; 2]>,
    cfg: &CouplingConfig,
    segs_a: &SegmentParams,
    segs_b: &SegmentParams,
) -> Result<(TorqueVec, TorqueVec)> {
    match cfg.space {
        CouplingSpace::Joint => {
            let (ta, tb) = joint_coupling(a, b, cfg)?;
            let alt = match (&cfg.mode, &cfg.asymmetric) {
                (CouplingMode::Asymmetric, Some(g)) => {
                    let raw = joint_raw(a, b, &g.k_joint, &g.c_joint, &cfg.q0);
                    Some(AlternateTorques {
                        user: g.user,
                        tau_a: -raw,
                        tau_b: raw,
                    })
                }
                _ => None,
            };
            let (ta, tb) = apply_directionality(&ta, &tb, cfg.mode, alt.as_ref())?;
            Ok((TorqueVec::Joint(ta), TorqueVec::Joint(tb)))
        }
        CouplingSpace::Task => {
            let tc = task_coupling(a, b, stance, cfg, segs_a, segs_b)?;
            let alt = match (&cfg.mode, &cfg.asymmetric) {
                (CouplingMode::Asymmetric, Some(g)) => {
                    let mut alt_cfg = cfg.clone();
                    alt_cfg.k_task = g.k_task;
                    alt_cfg.c_task = g.c_task;
                    let alt_tc = task_coupling(a, b, stance, &alt_cfg, segs_a, segs_b)?;
                    Some(AlternateTorques {
                        user: g.user,
                        tau_a: alt_tc.tau_a,
                        tau_b: alt_tc.tau_b,
                    })
                }
                _ => None,
            };
            let (ta, tb) = apply_directionality(&tc.tau_a, &tc.tau_b, cfg.mode, alt.as_ref())?;
            Ok((TorqueVec::Task(ta), TorqueVec::Task(tb)))
        }
    }
}

/// Torque, velocity and power limits of the rendering stage, plus its
/// first-order lag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderLimits {
    /// Per-joint torque limit, Nm.
    pub tau_max: f64,
    /// Joint speed above which aggravating torque components are zeroed,
    /// rad/s.
    pub qdot_max: f64,
    /// Per-joint mechanical power limit, W.
    pub p_max: f64,
    /// First-order lag time constant, s. Zero bypasses the filter exactly.
    pub lag_tau: f64,
}

impl Default for RenderLimits {
    fn default() -> Self {
        RenderLimits {
            tau_max: 80.0,
            qdot_max: 8.0,
            p_max: 400.0,
            lag_tau: 0.05,
        }
    }
}

impl RenderLimits {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.tau_max > 0.0) {
            out.push("limits.tau_max must be positive".to_string());
        }
        if !(self.qdot_max > 0.0) {
            out.push("limits.qdot_max must be positive".to_string());
        }
        if !(self.p_max > 0.0) {
            out.push("limits.p_max must be positive".to_string());
        }
        if !(self.lag_tau >= 0.0) || !self.lag_tau.is_finite() {
            out.push("limits.lag_tau must be finite and >= 0".to_string());
        }
        out
    }
}

/// Which limits clipped a component during rendering (bit flags per joint).
pub(crate) const SAT_TORQUE: u8 = 1;
pub(crate) const SAT_POWER: u8 = 2;
pub(crate) const SAT_VELOCITY: u8 = 4;

/// Rendering core over an N-component torque with matching generalized
/// velocities. Returns the applied torque and per-component saturation
/// flags.
pub(crate) fn render_detailed<const N: usize>(
    tau_des: &SVector<f64, N>,
    qdot_gen: &SVector<f64, N>,
    limits: &RenderLimits,
    prev_applied: &SVector<f64, N>,
    dt: f64,
) -> Result<(SVector<f64, N>, [u8; N])> {
    if !tau_des.iter().all(|v| v.is_finite())
        || !prev_applied.iter().all(|v| v.is_finite())
        || !qdot_gen.iter().all(|v| v.is_finite())
    {
        return Err(Error::NonFinite("render input"));
    }
    if !(dt > 0.0) {
        return Err(Error::NotPositive {
            what: "dt",
            value: dt,
        });
    }
    let alpha = dt / (limits.lag_tau + dt);
    let mut out = SVector::<f64, N>::zeros();
    let mut sat = [0u8; N];
    for j in 0..N {
        // bypass exactly at zero lag so unclamped torques pass through
        // bit-identically
        let mut t = if limits.lag_tau == 0.0 {
            tau_des[j]
        } else {
            prev_applied[j] + alpha * (tau_des[j] - prev_applied[j])
        };
        if t.abs() > limits.tau_max {
            t = t.clamp(-limits.tau_max, limits.tau_max);
            sat[j] |= SAT_TORQUE;
        }
        let w = qdot_gen[j].abs();
        if w > limits.p_max / limits.tau_max {
            let lim = limits.p_max / w;
            if t.abs() > lim {
                t = t.clamp(-lim, lim);
                sat[j] |= SAT_POWER;
            }
        }
        if w > limits.qdot_max && t * qdot_gen[j] > 0.0 {
            t = 0.0;
            sat[j] |= SAT_VELOCITY;
        }
        out[j] = t;
    }
    Ok((out, sat))
}

/// Render a joint-space coupling torque: first-order lag toward the desired
/// value, then torque, power, and velocity limiting against the user's
/// current joint speeds.
pub fn render(
    tau_des: &Vector4<f64>,
    state: &AgentState,
    limits: &RenderLimits,
    prev_applied: &Vector4<f64>,
    dt: f64,
) -> Result<Vector4<f64>> {
    let (out, _) = render_detailed(tau_des, &state.qdot, limits, prev_applied, dt)?;
    Ok(out)
}

/// Render a task-space generalized torque. The backpack component (index 0)
/// sees the lag and the torque clamp but no velocity or power limiting since
/// the torso does not move.
pub fn render_task(
    tau_des: &SVector<f64, 5>,
    state: &AgentState,
    limits: &RenderLimits,
    prev_applied: &SVector<f64, 5>,
    dt: f64,
) -> Result<SVector<f64, 5>> {
    let (out, _) = render_detailed(tau_des, &state.gen_dot(), limits, prev_applied, dt)?;
    Ok(out)
}

//! Ready-made scenarios for the shipped experiment conditions.

use crate::coupling::{CouplingConfig, CouplingMode, CouplingSpace};
use crate::error::{Error, Result};
use crate::model::{GaitPattern, ImpedanceParams};
use crate::sim::{AgentConfig, Maneuver, Scenario};
use crate::types::{to_rad, Side, UserId};

/// Names accepted by [`preset`], in display order.
pub const PRESET_NAMES: [&str; 7] = [
    "nc",
    "soft",
    "hard",
    "hard-hip30",
    "hard-knee20",
    "uni-joint",
    "uni-task-static",
];

/// Entrainment gain of the walking dyad conditions.
pub const DYAD_ENTRAIN_GAIN: f64 = 0.25;

/// Left-leg (hip, knee) amplitude factors of the uni-joint leader: the
/// least-squares amplitude fit of the default swing-foot path to a
/// 35%-wider, 20%-taller one. The exact scaled path leaves the leg's
/// workspace, so the fitted path is a surrogate (about 2.5 cm RMS from the
/// workspace-projected target).
pub const UNI_JOINT_LEADER_ROM: (f64, f64) = (1.299, 1.200);

fn walking_agent(cadence: f64, rom_scale: [f64; 4], kp: f64, entrain_gain: f64) -> AgentConfig {
    AgentConfig {
        gait: GaitPattern {
            cadence,
            rom_scale,
            entrain_gain,
            ..GaitPattern::default()
        },
        impedance: ImpedanceParams::with_kp(kp),
        ..AgentConfig::default()
    }
}

/// The standard walking dyad: user A at 0.60 strides/s with full range of
/// motion, user B at 0.66 strides/s with hip range scaled to 75%.
fn walking_dyad(label: &str, coupling: CouplingConfig) -> Scenario {
    Scenario {
        label: label.to_string(),
        coupling,
        agents: [
            walking_agent(0.60, [1.0; 4], 100.0, DYAD_ENTRAIN_GAIN),
            walking_agent(0.66, [0.75, 1.0, 0.75, 1.0], 100.0, DYAD_ENTRAIN_GAIN),
        ],
        ..Scenario::default()
    }
}

fn hard_coupling() -> CouplingConfig {
    CouplingConfig::joint_uniform(70.0, 10.0)
}

/// Build one of the shipped scenarios by name (see [`PRESET_NAMES`]).
///
/// * `nc` — the walking dyad with the coupling disconnected (zero gains).
/// * `soft` — joint-space spring-damper, K = 30 Nm/rad, C = 4 Nms/rad.
/// * `hard` — joint-space spring-damper, K = 70 Nm/rad, C = 10 Nms/rad.
/// * `hard-hip30` — `hard` with a 30 degree hip neutral offset, pushing the
///   users' hips apart.
/// * `hard-knee20` — `hard` with a 20 degree knee neutral offset.
/// * `uni-joint` — one-way joint coupling (A leads) on the left hip and
///   knee only; the leader walks an amplified left-leg path
///   ([`UNI_JOINT_LEADER_ROM`]), the follower runs a compliant surrogate
///   (kp = 40) at the same cadence, entrainment off.
/// * `uni-task-static` — one-way vertical ankle-force coupling between two
///   standing users (right leg fixed as stance); the leader's swing ankle
///   ramps up 0.40 m over 2 s and holds, the follower hangs from a
///   compliant surrogate (kp = 25).
pub fn preset(name: &str) -> Result<Scenario> {
    match name {
        "nc" => Ok(walking_dyad("nc", CouplingConfig::joint_uniform(0.0, 0.0))),
        "soft" => Ok(walking_dyad(
            "soft",
            CouplingConfig::joint_uniform(30.0, 4.0),
        )),
        "hard" => Ok(walking_dyad("hard", hard_coupling())),
        "hard-hip30" => {
            let q = to_rad(30.0);
            let mut cfg = hard_coupling();
            cfg.q0 = [q, 0.0, q, 0.0];
            Ok(walking_dyad("hard-hip30", cfg))
        }
        "hard-knee20" => {
            let q = to_rad(20.0);
            let mut cfg = hard_coupling();
            cfg.q0 = [0.0, q, 0.0, q];
            Ok(walking_dyad("hard-knee20", cfg))
        }
        "uni-joint" => {
            let coupling = CouplingConfig {
                space: CouplingSpace::Joint,
                mode: CouplingMode::UniAToB,
                k_joint: [100.0, 100.0, 0.0, 0.0],
                c_joint: [10.0, 10.0, 0.0, 0.0],
                ..CouplingConfig::default()
            };
            let (hip_rom, knee_rom) = UNI_JOINT_LEADER_ROM;
            Ok(Scenario {
                label: "uni-joint".to_string(),
                coupling,
                agents: [
                    walking_agent(0.60, [hip_rom, knee_rom, 1.0, 1.0], 100.0, 0.0),
                    walking_agent(0.60, [0.75, 1.0, 0.75, 1.0], 40.0, 0.0),
                ],
                ..Scenario::default()
            })
        }
        "uni-task-static" => {
            let coupling = CouplingConfig {
                space: CouplingSpace::Task,
                mode: CouplingMode::UniAToB,
                k_task: [0.0, 250.0],
                c_task: [0.0, 50.0],
                ..CouplingConfig::default()
            };
            Ok(Scenario {
                label: "uni-task-static".to_string(),
                duration: 10.0,
                coupling,
                agents: [
                    walking_agent(0.60, [0.0; 4], 400.0, 0.0),
                    walking_agent(0.60, [0.0; 4], 25.0, 0.0),
                ],
                stance_override: Some(Side::Right),
                maneuver: Some(Maneuver::VerticalReach {
                    user: UserId::A,
                    rise: 0.40,
                    ramp_duration: 2.0,
                }),
                ..Scenario::default()
            })
        }
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

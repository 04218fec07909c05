//! Simulation library for a pair of lower-limb exoskeleton users connected
//! through a virtual spring-damper, in joint space or in task (ankle) space.
//!
//! The crate is organized as a pipeline:
//!
//! * [`model`] — planar leg kinematics, gait reference curves, and the
//!   impedance-controlled gait surrogate that stands in for a human wearer.
//! * [`coupling`] — the virtual element connecting the two users, the
//!   directionality modes, and the torque rendering stage (lag and limits).
//! * [`sim`] — deterministic fixed-timestep orchestration of two agents plus
//!   the coupling node, producing a complete [`sim::TrialLog`].
//! * [`analysis`] — heel-strike detection, gait-cycle normalization, joint
//!   difference and synchronization metrics, and the energy audit.
//! * [`presets`] — ready-made scenarios for the shipped experiment
//!   conditions.
//!
//! Everything is pure and deterministic: the same [`sim::Scenario`] always
//! produces a bit-identical log.

pub mod analysis;
pub mod coupling;
pub mod error;
pub mod model;
pub mod presets;
pub mod sim;
pub mod types;

pub use error::{Error, Result};
pub use types::{Side, UserId};

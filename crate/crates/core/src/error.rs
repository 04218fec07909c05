//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by model, coupling, simulation, and analysis code.
#[derive(Debug, Error)]
pub enum Error {
    /// An input that must be finite contained NaN or infinity.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// A quantity that must be strictly positive was not.
    #[error("{what} must be positive (got {value})")]
    NotPositive { what: &'static str, value: f64 },

    /// A scenario field failed validation.
    #[error("invalid scenario: {0}")]
    Scenario(String),

    /// A coupling operation was called with a config for the other space.
    #[error("coupling space mismatch: operation requires {expected} space")]
    SpaceMismatch { expected: &'static str },

    /// Task-space coupling needs a stance leg for each user.
    #[error("missing stance assignment for task-space coupling")]
    MissingStance,

    /// Asymmetric mode was requested without the alternate gain set.
    #[error("asymmetric mode requires an alternate gain set")]
    MissingAsymmetricGains,

    /// The integrator detected a numeric blow-up and stopped the trial.
    #[error("simulation aborted at tick {tick} (t = {time:.3} s): {reason}")]
    Aborted {
        tick: usize,
        time: f64,
        reason: String,
    },

    /// Not enough heel strikes / gait cycles for the requested analysis.
    #[error("insufficient cycles: {0}")]
    InsufficientCycles(String),

    /// Paired cycle sets must have equal counts.
    #[error("cycle count mismatch: {a} vs {b}")]
    CycleMismatch { a: usize, b: usize },

    /// Preset name outside the shipped set.
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
}

pub type Result<T> = std::result::Result<T, Error>;

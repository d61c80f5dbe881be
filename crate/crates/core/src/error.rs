//! Error types shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Rejected configuration. Always names the offending field.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("unknown WMO sea state code {0} (supported: 0, 1, 2)")]
    UnknownSeaState(u8),
}

impl ConfigError {
    pub fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field,
            reason: reason.into(),
        }
    }
}

/// Protocol violations when driving an environment.
#[derive(Debug, Error)]
pub enum StepError {
    #[error("step called after episode end (t = {t}); reset the environment first")]
    EpisodeOver { t: u32 },
}

/// Agent-level failures.
#[derive(Debug, Error)]
pub enum SacError {
    #[error("observation contains non-finite values")]
    NonFiniteObservation,
    #[error("replay buffer holds {len} transitions but the batch size is {batch}")]
    BufferUnderfilled { len: usize, batch: usize },
}

/// Failures loading or storing network/policy checkpoints.
#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("not a recognized checkpoint stream (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u8, supported: u8 },
    #[error("checkpoint stream truncated or corrupt: {0}")]
    Corrupt(String),
    #[error(
        "checkpoint dimensions (obs {found_obs}, action {found_act}) do not match the \
         environment (obs {want_obs}, action {want_act})"
    )]
    DimMismatch {
        found_obs: u32,
        found_act: u32,
        want_obs: u32,
        want_act: u32,
    },
}

/// Umbrella error for the train/eval harnesses.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("output directory {path}: {source}")]
    OutputDir {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Sac(#[from] SacError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
}

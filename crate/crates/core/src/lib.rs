//! Wave-disturbed grasping: a deterministic kinematic environment where a
//! gripper on a wave-rocked base retrieves a cube from a static dock, a
//! from-scratch soft actor-critic trainer for it, and an evaluation harness
//! that tests trained policies across WMO sea states.

pub mod angles;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod eval;
pub mod nn;
pub mod reward;
pub mod sac;
pub mod seeding;
pub mod sim;
pub mod train;
pub mod wave;

pub use config::{config_hash, hash_hex, EnvConfig, FileConfig};
pub use error::{CheckpointError, ConfigError, HarnessError, SacError, StepError};
pub use eval::{
    distance_decay_stat, evaluate_checkpoint, evaluate_policy, AgentPolicy, EvalProtocol,
    EvalReport, Policy, ScriptedPolicy, TrialTrace,
};
pub use sac::{ActionMode, LossReport, PolicyCheckpoint, ReplayBuffer, SacAgent, SacConfig};
pub use sim::{
    contact_check, ActionCommand, CubeState, GraspEnv, GripperState, Observation,
    StackedObservation, StepInfo, StepResult, ACTION_DIM, OBS_DIM, STACKED_OBS_DIM,
};
pub use train::{smooth, train, EpisodeRecord, TrainConfig, TrainOutcome};
pub use wave::SeaStateSpec;

/// Seed used by every command when none is given, so default runs are
/// reproducible.
pub const DEFAULT_SEED: u64 = 7;

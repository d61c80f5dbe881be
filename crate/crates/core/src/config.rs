//! Environment configuration, the on-disk config file, and config hashing.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ConfigError;
use crate::eval::EvalProtocol;
use crate::sac::SacConfig;
use crate::train::TrainConfig;

/// Geometry, kinematics and episode parameters of the grasping environment.
///
/// Distances are meters, angles radians, `dt` seconds per control step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Position step scale: meters moved per unit action component.
    pub beta_pos: f64,
    /// Yaw step scale: radians per unit action component.
    pub beta_yaw: f64,
    /// Simulated seconds per control step.
    pub dt: f64,
    /// Cube edge length.
    pub cube_side: f64,
    /// Fully-open gripper aperture.
    pub w_max: f64,
    /// Lower corner of the commanded-position workspace box.
    pub workspace_min: [f64; 3],
    /// Upper corner of the commanded-position workspace box.
    pub workspace_max: [f64; 3],
    /// Lower corner of the cube spawn rectangle (x, y).
    pub spawn_min: [f64; 2],
    /// Upper corner of the cube spawn rectangle (x, y).
    pub spawn_max: [f64; 2],
    /// Training episode length in steps.
    pub episode_len_train: u32,
    /// Cube lift above resting that earns the lift bonus (the "1 cm" rule).
    pub lift_partial: f64,
    /// Cube center height that counts as task success.
    pub lift_success: f64,
    /// Horizontal contact tolerance.
    pub tol_xy: f64,
    /// Vertical contact tolerance.
    pub tol_z: f64,
    /// Yaw contact tolerance (after folding by cube symmetry).
    pub tol_yaw: f64,
    /// Default reset seed when a caller does not supply one.
    pub rng_seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            beta_pos: 0.05,
            beta_yaw: 0.1,
            dt: 0.1,
            cube_side: 0.05,
            w_max: 0.10,
            workspace_min: [-0.5, -0.5, 0.02],
            workspace_max: [0.5, 0.5, 0.6],
            spawn_min: [-0.15, -0.15],
            spawn_max: [0.15, 0.15],
            episode_len_train: 100,
            lift_partial: 0.01,
            lift_success: 0.20,
            tol_xy: 0.015,
            tol_z: 0.02,
            tol_yaw: 0.15,
            rng_seed: crate::DEFAULT_SEED,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn positive(field: &'static str, v: f64) -> Result<(), ConfigError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::invalid(field, "must be a positive finite number"))
            }
        }
        positive("beta_pos", self.beta_pos)?;
        positive("beta_yaw", self.beta_yaw)?;
        positive("dt", self.dt)?;
        positive("cube_side", self.cube_side)?;
        positive("w_max", self.w_max)?;
        positive("lift_partial", self.lift_partial)?;
        positive("lift_success", self.lift_success)?;
        positive("tol_xy", self.tol_xy)?;
        positive("tol_z", self.tol_z)?;
        positive("tol_yaw", self.tol_yaw)?;
        if self.cube_side > self.w_max {
            return Err(ConfigError::invalid(
                "cube_side",
                "must not exceed w_max or the open gripper cannot admit the cube",
            ));
        }
        if self.lift_partial >= self.lift_success {
            return Err(ConfigError::invalid(
                "lift_partial",
                "must be smaller than lift_success",
            ));
        }
        if self.episode_len_train == 0 {
            return Err(ConfigError::invalid("episode_len_train", "must be at least 1"));
        }
        for i in 0..3 {
            if !self.workspace_min[i].is_finite()
                || !self.workspace_max[i].is_finite()
                || self.workspace_min[i] >= self.workspace_max[i]
            {
                return Err(ConfigError::invalid(
                    "workspace_min/workspace_max",
                    format!("axis {i} must satisfy min < max with finite bounds"),
                ));
            }
        }
        for i in 0..2 {
            if !self.spawn_min[i].is_finite()
                || !self.spawn_max[i].is_finite()
                || self.spawn_min[i] >= self.spawn_max[i]
            {
                return Err(ConfigError::invalid(
                    "spawn_min/spawn_max",
                    format!("axis {i} must satisfy min < max with finite bounds"),
                ));
            }
            if self.spawn_min[i] < self.workspace_min[i] || self.spawn_max[i] > self.workspace_max[i]
            {
                return Err(ConfigError::invalid(
                    "spawn_min/spawn_max",
                    format!("axis {i} must lie inside the workspace footprint"),
                ));
            }
        }
        Ok(())
    }
}

/// Everything a run reads from a config file. Missing sections or keys fall
/// back to the built-in defaults, so an empty file is a valid config.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FileConfig {
    pub env: EnvConfig,
    pub sac: SacConfig,
    pub train: TrainConfig,
    pub eval: EvalProtocol,
}

impl FileConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError::invalid("config file", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

/// SHA-256 over the canonical JSON of the environment and agent configs.
/// Stored in checkpoints and run manifests so a run can be matched to the
/// exact configuration that produced it.
pub fn config_hash(env: &EnvConfig, sac: &SacConfig) -> [u8; 32] {
    let canon = serde_json::json!({ "env": env, "sac": sac });
    let mut hasher = Sha256::new();
    hasher.update(canon.to_string().as_bytes());
    hasher.finalize().into()
}

pub fn hash_hex(hash: &[u8; 32]) -> String {
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        EnvConfig::default().validate().unwrap();
    }

    #[test]
    fn validation_names_the_offending_field() {
        let cfg = EnvConfig {
            beta_pos: -1.0,
            ..EnvConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("beta_pos"));

        let cfg = EnvConfig {
            lift_partial: 0.3,
            ..EnvConfig::default()
        };
        assert!(cfg
            .validate()
            .unwrap_err()
            .to_string()
            .contains("lift_partial"));

        let cfg = EnvConfig {
            spawn_max: [0.7, 0.1],
            ..EnvConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("spawn"));

        let cfg = EnvConfig {
            cube_side: 0.2,
            ..EnvConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("cube_side"));
    }

    #[test]
    fn empty_file_yields_defaults() {
        let fc = FileConfig::from_toml_str("").unwrap();
        assert_eq!(fc.env, EnvConfig::default());
    }

    #[test]
    fn partial_file_overrides_only_named_keys() {
        let fc = FileConfig::from_toml_str(
            "[env]\nbeta_pos = 0.08\n\n[train]\nepisodes = 12\n",
        )
        .unwrap();
        assert_eq!(fc.env.beta_pos, 0.08);
        assert_eq!(fc.env.beta_yaw, EnvConfig::default().beta_yaw);
        assert_eq!(fc.train.episodes, 12);
    }

    #[test]
    fn wave_override_tables_parse() {
        let fc = FileConfig::from_toml_str(
            "[eval]\nsea_states = [1]\n\n[[eval.wave_overrides]]\nwmo_code = 1\namplitude = 0.05\n",
        )
        .unwrap();
        assert_eq!(fc.eval.wave_overrides.len(), 1);
        assert_eq!(fc.eval.wave_overrides[0].amplitude, 0.05);
        // Unspecified override fields fall back to the spec defaults.
        assert_eq!(fc.eval.wave_overrides[0].period, 5.0);
        fc.eval.validate().unwrap();
    }

    #[test]
    fn hash_changes_with_config() {
        let env = EnvConfig::default();
        let sac = SacConfig::default();
        let a = config_hash(&env, &sac);
        let mut env2 = env.clone();
        env2.beta_pos = 0.06;
        let b = config_hash(&env2, &sac);
        assert_ne!(a, b);
        assert_eq!(a, config_hash(&env, &sac));
        assert_eq!(hash_hex(&a).len(), 64);
    }
}

//! Run configuration: every tunable constant under one namespaced file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bc::BcConfig;
use crate::datagen::SamplingSpec;
use crate::hand::default_hand;
use crate::policy::{GraspEnv, PpoConfig, RewardWeights};
use crate::sim::{Sim, SimConfig};
use crate::skill::SkillConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; subcommand `--seed` flags override it.
    pub seed: u64,
    /// Default output directory for subcommands given no `--out`.
    pub out: String,
    pub sim: SimConfig,
    pub skill: SkillConfig,
    pub sampling: SamplingSpec,
    pub reward: RewardWeights,
    pub ppo: PpoConfig,
    pub bc: BcConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: "runs".into(),
            sim: SimConfig::default(),
            skill: SkillConfig::default(),
            sampling: SamplingSpec::default(),
            reward: RewardWeights::default(),
            ppo: PpoConfig::default(),
            bc: BcConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("invalid {section} config: {message}")]
    Invalid { section: &'static str, message: String },
}

fn invalid(section: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        section,
        message: message.into(),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse {
                path: path.display().to_string(),
                source,
            },
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|source| ConfigError::Parse {
            path: "<string>".into(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Pretty JSON of the defaults, the reference config.
    pub fn default_json() -> String {
        serde_json::to_string_pretty(&Self::default()).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.sim;
        let positive = [
            s.dt,
            s.contact_stiffness,
            s.friction,
            s.density,
            s.table_stiffness,
            s.max_joint_speed,
            s.max_penetration,
            s.max_palm_step,
            s.max_palm_rotation,
            s.max_object_speed,
        ];
        if s.substeps == 0 || positive.iter().any(|v| !(*v > 0.0)) {
            return Err(invalid("sim", "step sizes, stiffnesses and limits must be positive"));
        }
        if !(s.damping > 0.0 && s.damping <= 1.0) {
            return Err(invalid("sim", format!("damping {} outside (0, 1]", s.damping)));
        }
        let k = &self.skill;
        if k.horizon == 0 || k.ik_iterations == 0 || !(k.palm_scan_step > 0.0) {
            return Err(invalid("skill", "horizon, ik_iterations and palm_scan_step must be positive"));
        }
        if k.residual_bounds.iter().any(|b| !(*b >= 0.0)) {
            return Err(invalid("skill", "residual bounds must be non-negative"));
        }
        self.sampling.validate().map_err(|e| invalid("sampling", e.to_string()))?;
        self.reward.validate().map_err(|e| invalid("reward", e))?;
        self.ppo.validate().map_err(|e| invalid("ppo", e))?;
        self.bc.validate().map_err(|e| invalid("bc", e))?;
        Ok(())
    }

    pub fn env(&self) -> GraspEnv {
        GraspEnv {
            sim: Sim::new(self.sim.clone(), default_hand()),
            skill: self.skill.clone(),
            sampling: self.sampling.clone(),
            reward: self.reward,
        }
    }
}

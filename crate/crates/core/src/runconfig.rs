//! TOML run configuration. Every field has a default, so an empty file (or
//! none at all) is a valid configuration; CLI flags override loaded values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::supervisor::SupervisorConfig;
use crate::trainer::TrainerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub total_steps: usize,
    pub eval_every_episodes: usize,
    pub eval_episodes: usize,
    pub gamma: f64,
    pub lr: f64,
    pub beta_value: f64,
    pub beta_entropy: f64,
    pub supervisor_enabled: bool,
    pub env: EnvConfig,
    pub supervisor: SupervisorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainerConfig::default();
        Self {
            seed: t.seed,
            total_steps: t.total_steps,
            eval_every_episodes: t.eval_every_episodes,
            eval_episodes: t.eval_episodes,
            gamma: t.gamma,
            lr: t.lr,
            beta_value: t.beta_value,
            beta_entropy: t.beta_entropy,
            supervisor_enabled: t.supervisor_enabled,
            env: t.env,
            supervisor: t.supervisor,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(toml::from_str(&text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn to_trainer(&self) -> TrainerConfig {
        TrainerConfig {
            gamma: self.gamma,
            lr: self.lr,
            beta_value: self.beta_value,
            beta_entropy: self.beta_entropy,
            total_steps: self.total_steps,
            eval_every_episodes: self.eval_every_episodes,
            eval_episodes: self.eval_episodes,
            seed: self.seed,
            supervisor_enabled: self.supervisor_enabled,
            supervisor: self.supervisor,
            env: self.env.clone(),
            init_from: None,
            out_dir: None,
        }
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agent::{DqnConfig, EpsilonSchedule, RunConfig, Variant};
use crate::bridge::{ActionMap, Guidance};
use crate::envs::EnvConfig;
use crate::logic::parse_program;
use crate::rm::RewardMachine;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidanceBlock {
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Rule file; the domain's built-in policy when absent.
    #[serde(default)]
    pub rules: Option<PathBuf>,
    /// Action-map JSON; the built-in map when absent.
    #[serde(default)]
    pub action_map: Option<PathBuf>,
    #[serde(default)]
    pub normalized_rescale: bool,
    #[serde(default)]
    pub precompute_grounding: bool,
}

fn default_rho() -> f64 {
    0.8
}

impl Default for GuidanceBlock {
    fn default() -> Self {
        GuidanceBlock {
            rho: default_rho(),
            rules: None,
            action_map: None,
            normalized_rescale: false,
            precompute_grounding: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardMachineBlock {
    /// Machine JSON; the built-in machine for the task when absent.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Reward on every built-in transition.
    #[serde(default = "default_bonus")]
    pub bonus: f64,
}

fn default_bonus() -> f64 {
    0.1
}

impl Default for RewardMachineBlock {
    fn default() -> Self {
        RewardMachineBlock {
            path: None,
            bonus: default_bonus(),
        }
    }
}

/// One experiment file. Relative paths resolve against `base_dir`, which
/// [`ExperimentConfig::load`] sets to the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub env: EnvConfig,
    pub variants: Vec<Variant>,
    pub schedule: EpsilonSchedule,
    #[serde(default)]
    pub guidance: GuidanceBlock,
    #[serde(default)]
    pub reward_machine: RewardMachineBlock,
    #[serde(default)]
    pub network: DqnConfig,
    pub seeds: Vec<u64>,
    pub max_total_steps: u64,
    pub output_dir: PathBuf,
    /// Episodes in the rolling mean of the aggregate curves and in the final window.
    #[serde(default = "default_window")]
    pub smoothing_window: usize,
    /// Bucket width of the step-indexed aggregate.
    #[serde(default = "default_step_bucket")]
    pub step_bucket: u64,
    #[serde(default)]
    pub record_timing: bool,
    /// Worker threads; all available cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_window() -> usize {
    100
}

fn default_step_bucket() -> u64 {
    1000
}

impl ExperimentConfig {
    pub fn from_json_str(json: &str, base_dir: &Path) -> Result<ExperimentConfig, HarnessError> {
        let mut c: ExperimentConfig = serde_json::from_str(json).map_err(|e| HarnessError::Config(e.to_string()))?;
        c.base_dir = base_dir.to_path_buf();
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        ExperimentConfig::from_json_str(&text, &base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.variants.is_empty() {
            return bad("variants must not be empty".into());
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return bad("duplicate seeds".into());
        }
        if self.smoothing_window == 0 || self.step_bucket == 0 {
            return bad("smoothing_window and step_bucket must be positive".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        if !self.reward_machine.bonus.is_finite() {
            return bad("reward-machine bonus must be finite".into());
        }
        for p in [&self.guidance.rules, &self.guidance.action_map, &self.reward_machine.path]
            .into_iter()
            .flatten()
        {
            let full = self.resolve(p);
            if !full.is_file() {
                return bad(format!("{} does not exist", full.display()));
            }
        }
        crate::envs::GridEnv::new(&self.env).map_err(|e| HarnessError::Config(e.to_string()))?;
        for v in &self.variants {
            self.run_config(*v, self.seeds[0]).validate()?;
        }
        Ok(())
    }

    pub fn run_config(&self, variant: Variant, seed: u64) -> RunConfig {
        RunConfig {
            env: self.env.clone(),
            variant,
            schedule: self.schedule,
            rho: self.guidance.rho,
            normalized_rescale: self.guidance.normalized_rescale,
            dqn: self.network.clone(),
            max_total_steps: self.max_total_steps,
            seed,
            record_timing: self.record_timing,
        }
    }

    pub fn build_guidance(&self) -> Result<Guidance, HarnessError> {
        let domain = self.env.domain;
        let precompute = self.guidance.precompute_grounding;
        let map = match &self.guidance.action_map {
            Some(p) => ActionMap::from_json_file(domain, &self.resolve(p))?,
            None => ActionMap::builtin(domain),
        };
        let program = match &self.guidance.rules {
            Some(p) => {
                let full = self.resolve(p);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| HarnessError::Config(format!("{}: {e}", full.display())))?;
                parse_program(&text).map_err(crate::bridge::BridgeError::from)?
            }
            None => return Ok(Guidance::new(domain, builtin_program(self)?, map, precompute)?),
        };
        Ok(Guidance::new(domain, program, map, precompute)?)
    }

    pub fn build_reward_machine(&self) -> Result<RewardMachine, HarnessError> {
        Ok(match &self.reward_machine.path {
            Some(p) => RewardMachine::from_json_file(&self.resolve(p))?,
            None => RewardMachine::builtin(self.env.domain, self.env.task, self.reward_machine.bonus),
        })
    }
}

fn builtin_program(c: &ExperimentConfig) -> Result<crate::logic::Program, HarnessError> {
    let text = crate::bridge::builtin_policy(c.env.domain, c.env.task);
    Ok(parse_program(text).map_err(crate::bridge::BridgeError::from)?)
}

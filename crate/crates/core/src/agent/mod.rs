//! DQN training loops: plain, symbolically guided, the two single-component
//! ablations and the reward-machine baseline.

mod policy;
mod replay;
mod train;

pub use policy::{
    action_weights, argmax, epsilon_at, raw_weights, rescaled_q, sr_exploit, sr_explore, uniform_action,
    EpsilonSchedule,
};
pub use replay::ReplayBuffer;
pub use train::{
    evaluate, evaluate_policy, rng_stream, train, write_episodes_csv, EpisodeRecord, EvalSummary, RunOutput,
    STREAM_ACTIONS, STREAM_INIT, STREAM_LAYOUT,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bridge::BridgeError;
use crate::envs::{EnvConfig, EnvError};
use crate::neural::{NeuralError, TrainConfig};
use crate::rm::RmError;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid agent config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error(transparent)]
    Rm(#[from] RmError),
    #[error("metrics file: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[serde(alias = "DQN")]
    Dqn,
    #[serde(alias = "SR-DQN", alias = "sr-dqn")]
    SrDqn,
    /// Guided exploration, plain argmax exploitation.
    #[serde(alias = "SR-Exploration", alias = "sr-exploration")]
    SrExploration,
    /// Uniform exploration, rescaled exploitation.
    #[serde(alias = "SR-Exploitation", alias = "sr-exploitation")]
    SrExploitation,
    #[serde(alias = "RM-DQN", alias = "rm-dqn")]
    RmDqn,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Dqn,
        Variant::SrDqn,
        Variant::SrExploration,
        Variant::SrExploitation,
        Variant::RmDqn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Dqn => "dqn",
            Variant::SrDqn => "sr_dqn",
            Variant::SrExploration => "sr_exploration",
            Variant::SrExploitation => "sr_exploitation",
            Variant::RmDqn => "rm_dqn",
        }
    }

    pub fn sr_exploration(self) -> bool {
        matches!(self, Variant::SrDqn | Variant::SrExploration)
    }

    pub fn sr_exploitation(self) -> bool {
        matches!(self, Variant::SrDqn | Variant::SrExploitation)
    }

    pub fn needs_guidance(self) -> bool {
        self.sr_exploration() || self.sr_exploitation()
    }

    pub fn needs_reward_machine(self) -> bool {
        self == Variant::RmDqn
    }
}

/// Network and DQN hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub learning_starts: u64,
    /// Environment steps between gradient updates.
    pub train_freq: u64,
    /// Environment steps between hard target syncs.
    pub target_update: u64,
    pub gamma: f64,
    pub huber_delta: f64,
    pub max_grad_norm: Option<f64>,
    /// Start with a zero output layer so every Q-value begins at 0.
    pub zero_output_init: bool,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            hidden: vec![128, 128],
            learning_rate: 1e-4,
            batch_size: 64,
            buffer_capacity: 100_000,
            learning_starts: 1000,
            train_freq: 4,
            target_update: 1000,
            gamma: 0.99,
            huber_delta: 1.0,
            max_grad_norm: Some(10.0),
            zero_output_init: false,
        }
    }
}

impl DqnConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            gamma: self.gamma,
            huber_delta: self.huber_delta,
            max_grad_norm: self.max_grad_norm,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::Config(m.to_string()));
        if self.hidden.contains(&0) {
            return bad("hidden layer of width 0");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("need 0 < batch_size <= buffer_capacity");
        }
        if self.train_freq == 0 || self.target_update == 0 {
            return bad("train_freq and target_update must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if self.max_grad_norm.is_some_and(|n| n <= 0.0) {
            return bad("max_grad_norm must be positive");
        }
        Ok(())
    }
}

/// Everything one training run needs apart from the guidance program and
/// reward machine objects.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub variant: Variant,
    pub schedule: EpsilonSchedule,
    /// Confidence ρ ∈ [0, 1) in the suggested actions.
    pub rho: f64,
    /// Use normalized instead of raw weights inside k_a.
    pub normalized_rescale: bool,
    pub dqn: DqnConfig,
    pub max_total_steps: u64,
    pub seed: u64,
    /// Measure neural and symbolic time per step. Off keeps metrics files reproducible.
    pub record_timing: bool,
}

impl RunConfig {
    pub fn new(env: EnvConfig, variant: Variant, schedule: EpsilonSchedule, max_total_steps: u64, seed: u64) -> Self {
        RunConfig {
            env,
            variant,
            schedule,
            rho: 0.8,
            normalized_rescale: false,
            dqn: DqnConfig::default(),
            max_total_steps,
            seed,
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        self.schedule.validate()?;
        self.dqn.validate()?;
        if !(0.0..1.0).contains(&self.rho) {
            return Err(AgentError::Config(format!("rho {} not in [0, 1)", self.rho)));
        }
        if self.max_total_steps == 0 {
            return Err(AgentError::Config("max_total_steps must be positive".into()));
        }
        Ok(())
    }
}

//! Deterministic gridworlds: DoorKey (random N×N maps, egocentric 7×7 view)
//! and OfficeWorld (fixed 9×12 map).
//!
//! Both pay `1 - 0.9 * step_count / max_steps` on the step that completes the
//! task and 0 otherwise.

mod doorkey;
mod office;
mod planner;

pub use doorkey::{Cell, Color, Dir, DoorKeyEnv, DoorState, EgoView, DOORKEY_ACTIONS, VIEW_SIZE};
pub use office::{first_move, path_length, is_decoration, neighbour, Move, OfficeObs, OfficeTask, OfficeWorld, Room, OFFICE_ACTIONS, OFFICE_HEIGHT, OFFICE_WIDTH};
pub use planner::shortest_plan;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("action {action} out of range for {domain} ({count} actions)")]
    InvalidAction {
        domain: &'static str,
        action: usize,
        count: usize,
    },
    #[error("step called after the episode terminated")]
    EpisodeOver,
    #[error("could not generate a solvable layout after {0} attempts")]
    Unsolvable(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    #[serde(alias = "door_key")]
    DoorKey,
    #[serde(alias = "office_world", alias = "office")]
    OfficeWorld,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::DoorKey => "doorkey",
            Domain::OfficeWorld => "officeworld",
        }
    }

    pub fn action_names(self) -> &'static [&'static str] {
        match self {
            Domain::DoorKey => &DOORKEY_ACTIONS,
            Domain::OfficeWorld => &OFFICE_ACTIONS,
        }
    }
}

/// The environment block of an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub domain: Domain,
    /// OfficeWorld task; ignored for DoorKey.
    #[serde(default)]
    pub task: Option<OfficeTask>,
    /// DoorKey side length N (outer walls included).
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    /// DoorKey key count K.
    #[serde(default = "default_num_keys")]
    pub num_keys: usize,
    /// Defaults to 10·N² for DoorKey and 1000 for OfficeWorld.
    #[serde(default)]
    pub max_steps: Option<u32>,
    /// Mixed into each run's layout stream.
    #[serde(default)]
    pub seed: u64,
}

fn default_grid_size() -> usize {
    8
}

fn default_num_keys() -> usize {
    1
}

impl EnvConfig {
    pub fn doorkey(grid_size: usize, num_keys: usize) -> EnvConfig {
        EnvConfig {
            domain: Domain::DoorKey,
            task: None,
            grid_size,
            num_keys,
            max_steps: None,
            seed: 0,
        }
    }

    pub fn office(task: OfficeTask) -> EnvConfig {
        EnvConfig {
            domain: Domain::OfficeWorld,
            task: Some(task),
            grid_size: OFFICE_WIDTH,
            num_keys: 0,
            max_steps: None,
            seed: 0,
        }
    }

    pub fn effective_max_steps(&self) -> u32 {
        self.max_steps.unwrap_or(match self.domain {
            Domain::DoorKey => 10 * (self.grid_size * self.grid_size) as u32,
            Domain::OfficeWorld => 1000,
        })
    }

    pub fn label(&self) -> String {
        match self.domain {
            Domain::DoorKey => format!("doorkey-{}x{}-{}key", self.grid_size, self.grid_size, self.num_keys),
            Domain::OfficeWorld => format!("office-{}", self.task.unwrap_or_default().name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Observation {
    DoorKey(EgoView),
    Office(OfficeObs),
}

impl Observation {
    /// Indices of the one-hot input features that are set; every feature is binary.
    pub fn active_features(&self) -> Vec<u32> {
        match self {
            Observation::DoorKey(v) => v.active_features(),
            Observation::Office(o) => o.active_features(),
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.feature_dim()];
        for i in self.active_features() {
            x[i as usize] = 1.0;
        }
        x
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            Observation::DoorKey(_) => EgoView::FEATURE_DIM,
            Observation::Office(_) => OfficeObs::FEATURE_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    /// Episode over: success, failure or time limit.
    pub terminal: bool,
    /// Ended only because `step_count` reached `max_steps`.
    pub truncated: bool,
    pub success: bool,
}

/// Reward for completing the task on step `step_count` of `max_steps`.
pub fn success_reward(step_count: u32, max_steps: u32) -> f64 {
    1.0 - 0.9 * (step_count as f64 / max_steps as f64)
}

#[derive(Debug, Clone)]
pub enum GridEnv {
    DoorKey(DoorKeyEnv),
    Office(OfficeWorld),
}

impl GridEnv {
    pub fn new(config: &EnvConfig) -> Result<GridEnv, EnvError> {
        match config.domain {
            Domain::DoorKey => Ok(GridEnv::DoorKey(DoorKeyEnv::new(
                config.grid_size,
                config.num_keys,
                config.effective_max_steps(),
            )?)),
            Domain::OfficeWorld => Ok(GridEnv::Office(OfficeWorld::new(
                config.task.unwrap_or_default(),
                config.effective_max_steps(),
            )?)),
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            GridEnv::DoorKey(_) => Domain::DoorKey,
            GridEnv::Office(_) => Domain::OfficeWorld,
        }
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Observation, EnvError> {
        match self {
            GridEnv::DoorKey(e) => e.reset(rng),
            GridEnv::Office(e) => Ok(e.reset()),
        }
    }

    pub fn reset_with_seed(&mut self, seed: u64) -> Result<Observation, EnvError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.reset(&mut rng)
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        match self {
            GridEnv::DoorKey(e) => e.step(action),
            GridEnv::Office(e) => e.step(action),
        }
    }

    pub fn observe(&self) -> Observation {
        match self {
            GridEnv::DoorKey(e) => Observation::DoorKey(e.ego_view()),
            GridEnv::Office(e) => Observation::Office(e.observe()),
        }
    }

    pub fn num_actions(&self) -> usize {
        self.domain().action_names().len()
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            GridEnv::DoorKey(_) => EgoView::FEATURE_DIM,
            GridEnv::Office(_) => OfficeObs::FEATURE_DIM,
        }
    }

    pub fn task_success(&self) -> bool {
        match self {
            GridEnv::DoorKey(e) => e.task_success(),
            GridEnv::Office(e) => e.task_success(),
        }
    }

    pub fn step_count(&self) -> u32 {
        match self {
            GridEnv::DoorKey(e) => e.step_count(),
            GridEnv::Office(e) => e.step_count(),
        }
    }

    pub fn max_steps(&self) -> u32 {
        match self {
            GridEnv::DoorKey(e) => e.max_steps(),
            GridEnv::Office(e) => e.max_steps(),
        }
    }

    pub fn render(&self) -> String {
        match self {
            GridEnv::DoorKey(e) => e.render(),
            GridEnv::Office(e) => e.render(),
        }
    }
}

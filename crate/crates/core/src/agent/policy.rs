use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AgentError;

/// Linear ε decay from `initial` to `final` over the first `fraction` of
/// training, then flat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSchedule {
    #[serde(default = "one")]
    pub initial: f64,
    #[serde(rename = "final")]
    pub final_eps: f64,
    /// ε_r ∈ (0, 1].
    pub fraction: f64,
    /// E. When absent the horizon is the run's step budget and progress is
    /// measured in steps taken before each episode starts.
    #[serde(default)]
    pub episodes: Option<u64>,
}

fn one() -> f64 {
    1.0
}

impl EpsilonSchedule {
    pub fn new(initial: f64, final_eps: f64, fraction: f64, episodes: Option<u64>) -> Result<Self, AgentError> {
        let s = EpsilonSchedule {
            initial,
            final_eps,
            fraction,
            episodes,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if !(0.0 <= self.final_eps && self.final_eps <= self.initial && self.initial <= 1.0) {
            return Err(AgentError::Config(format!(
                "need 0 <= final ({}) <= initial ({}) <= 1",
                self.final_eps, self.initial
            )));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(AgentError::Config(format!("exploration fraction {} not in (0, 1]", self.fraction)));
        }
        if self.episodes == Some(0) {
            return Err(AgentError::Config("schedule horizon of 0 episodes".into()));
        }
        Ok(())
    }

    /// ε at training progress `p` (episodes or steps over the horizon).
    pub fn at_progress(&self, p: f64) -> f64 {
        let ratio = p / self.fraction;
        if ratio >= 1.0 {
            return self.final_eps;
        }
        (self.initial - (self.initial - self.final_eps) * ratio.max(0.0)).max(self.final_eps)
    }
}

/// ε for `episode` out of `total` episodes.
pub fn epsilon_at(schedule: &EpsilonSchedule, episode: u64, total: u64) -> f64 {
    let ratio = episode as f64 / (schedule.fraction * total as f64);
    if ratio >= 1.0 {
        return schedule.final_eps;
    }
    (schedule.initial - (schedule.initial - schedule.final_eps) * ratio).max(schedule.final_eps)
}

/// ρ for suggested actions and 1−ρ for the rest, unnormalized.
pub fn raw_weights(num_actions: usize, suggested: &[usize], rho: f64) -> Vec<f64> {
    let mut w = vec![1.0 - rho; num_actions];
    for &a in suggested {
        w[a] = rho;
    }
    w
}

/// Raw weights divided by their sum.
pub fn action_weights(num_actions: usize, suggested: &[usize], rho: f64) -> Vec<f64> {
    let mut w = raw_weights(num_actions, suggested, rho);
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter_mut().for_each(|x| *x /= total);
    } else {
        // ρ = 0 with every action suggested
        w.iter_mut().for_each(|x| *x = 1.0 / num_actions as f64);
    }
    w
}

pub fn uniform_action<R: Rng + ?Sized>(num_actions: usize, rng: &mut R) -> usize {
    rng.gen_range(0..num_actions)
}

/// Weighted draw when something is suggested, uniform otherwise.
pub fn sr_explore<R: Rng + ?Sized>(num_actions: usize, suggested: &[usize], rho: f64, rng: &mut R) -> usize {
    if suggested.is_empty() {
        return uniform_action(num_actions, rng);
    }
    let w = action_weights(num_actions, suggested, rho);
    match WeightedIndex::new(&w) {
        Ok(dist) => dist.sample(rng),
        Err(_) => uniform_action(num_actions, rng),
    }
}

/// First index of the largest value.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Q-values scaled by k_a = 1 + ε·w_a.
pub fn rescaled_q(q: &[f64], suggested: &[usize], epsilon: f64, rho: f64, normalized: bool) -> Vec<f64> {
    let w = if normalized {
        action_weights(q.len(), suggested, rho)
    } else {
        raw_weights(q.len(), suggested, rho)
    };
    q.iter().zip(&w).map(|(q, w)| q * (1.0 + epsilon * w)).collect()
}

pub fn sr_exploit(q: &[f64], suggested: &[usize], epsilon: f64, rho: f64, normalized: bool) -> usize {
    argmax(&rescaled_q(q, suggested, epsilon, rho, normalized))
}

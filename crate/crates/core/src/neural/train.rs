use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::network::{Input, QNetwork};
use super::optim::{Adam, Gradients};
use super::NeuralError;

/// A stored observation. Shared so that consecutive transitions reuse it.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Binary(Arc<[u32]>),
    Dense(Arc<[f64]>),
}

impl Features {
    pub fn as_input(&self) -> Input<'_> {
        match self {
            Features::Binary(x) => Input::Binary(x),
            Features::Dense(x) => Input::Dense(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Features,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Features,
    /// True only when the episode really ended; time-limit cuts keep bootstrapping.
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    pub huber_delta: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub max_grad_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.99,
            huber_delta: 1.0,
            max_grad_norm: Some(10.0),
        }
    }
}

pub fn huber(x: f64, delta: f64) -> f64 {
    if x.abs() <= delta {
        0.5 * x * x
    } else {
        delta * (x.abs() - 0.5 * delta)
    }
}

pub fn huber_grad(x: f64, delta: f64) -> f64 {
    x.clamp(-delta, delta)
}

/// Mean Huber loss of `Q(s,a) - y` over the batch, with
/// `y = r + γ max_a' Q_target(s', a')` (just `r` when terminal), and its
/// gradient with respect to the online parameters.
pub fn loss_and_gradients(
    net: &QNetwork,
    target: &QNetwork,
    batch: &[&Transition],
    config: &TrainConfig,
) -> Result<(f64, Gradients), NeuralError> {
    if batch.is_empty() {
        return Err(NeuralError::EmptyBatch);
    }
    if net.sizes() != target.sizes() {
        return Err(NeuralError::ArchitectureMismatch {
            left: net.sizes(),
            right: target.sizes(),
        });
    }
    let n = batch.len() as f64;
    let mut grads = Gradients::zeros_like(net);
    let mut loss = 0.0;
    let mut max_q: f64 = 0.0;
    let mut max_target: f64 = 0.0;
    let mut d_out = vec![0.0; net.output_dim()];
    for t in batch {
        if t.action >= net.output_dim() {
            return Err(NeuralError::ActionOutOfRange {
                action: t.action,
                count: net.output_dim(),
            });
        }
        let y = if t.terminal {
            t.reward
        } else {
            let next = target.forward(t.next_obs.as_input())?;
            t.reward + config.gamma * next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        let input = t.obs.as_input();
        net.check_input(input)?;
        let acts = net.activations(input);
        let q = acts.outputs.last().unwrap()[t.action];
        let err = q - y;
        loss += huber(err, config.huber_delta) / n;
        max_q = max_q.max(q.abs());
        max_target = max_target.max(y.abs());
        d_out.iter_mut().for_each(|d| *d = 0.0);
        d_out[t.action] = huber_grad(err, config.huber_delta) / n;
        net.backward(input, &acts, &d_out, &mut grads);
    }
    if !loss.is_finite() {
        return Err(NeuralError::NonFiniteLoss {
            loss,
            update: 0,
            max_q,
            max_target,
        });
    }
    Ok((loss, grads))
}

/// One optimizer step on a minibatch; returns the batch loss before the update.
pub fn train_step(
    net: &mut QNetwork,
    target: &QNetwork,
    batch: &[&Transition],
    config: &TrainConfig,
    optimizer: &mut Adam,
) -> Result<f64, NeuralError> {
    let (loss, mut grads) = loss_and_gradients(net, target, batch, config).map_err(|e| match e {
        NeuralError::NonFiniteLoss {
            loss,
            max_q,
            max_target,
            ..
        } => NeuralError::NonFiniteLoss {
            loss,
            update: optimizer.steps() + 1,
            max_q,
            max_target,
        },
        other => other,
    })?;
    if let Some(max_norm) = config.max_grad_norm {
        let norm = grads.norm();
        if norm > max_norm {
            grads.scale(max_norm / norm);
        }
    }
    optimizer.apply(net, &grads);
    Ok(loss)
}

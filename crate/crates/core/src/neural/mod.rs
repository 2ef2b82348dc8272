//! Fully connected Q-network trained with hand-written backpropagation.
//!
//! Hidden layers use ReLU, the output layer is linear. The first layer also
//! accepts sparse binary inputs given as the indices of the set features,
//! which is how environment observations are fed.

mod checkpoint;
mod network;
mod optim;
mod train;

pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use network::{sync_target, Input, QNetwork};
pub use optim::{Adam, Gradients};
pub use train::{huber, huber_grad, loss_and_gradients, train_step, Features, Transition, TrainConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("input has {found} features, network expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("active feature index {index} out of range for input size {size}")]
    FeatureOutOfRange { index: u32, size: usize },
    #[error("network architectures differ: {left:?} vs {right:?}")]
    ArchitectureMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("a network needs at least an input and an output layer, got sizes {0:?}")]
    BadArchitecture(Vec<usize>),
    #[error("empty training batch")]
    EmptyBatch,
    #[error("action {action} out of range for {count} outputs")]
    ActionOutOfRange { action: usize, count: usize },
    #[error("non-finite loss {loss} at update {update} (max |Q| {max_q}, max |target| {max_target})")]
    NonFiniteLoss {
        loss: f64,
        update: u64,
        max_q: f64,
        max_target: f64,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

//! Deep Q-learning whose exploration and greedy choices are biased by the
//! actions a stratified logic program suggests for the current state.

pub mod agent;
pub mod bridge;
pub mod envs;
pub mod harness;
pub mod logic;
pub mod neural;
pub mod rm;

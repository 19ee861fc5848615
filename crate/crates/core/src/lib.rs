//! Reinforcement learning for lost-sales inventory control.
//!
//! The crate bundles the inventory simulators, feedback-graph side
//! experiences, an ensemble-disagreement intrinsic reward, tabular and
//! neural Q-learning agents, classic heuristics, exact oracles for small
//! instances and an experiment harness.

pub mod agents;
pub mod curiosity;
pub mod demand;
pub mod env;
pub mod error;
pub mod eval;
pub mod fg;
pub mod harness;
pub mod heuristics;
pub mod params;
pub mod theory;

pub use demand::DemandModel;
pub use error::{Error, Result};
pub use params::ItemParams;

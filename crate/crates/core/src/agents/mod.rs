//! Off-policy learners: tabular Q-learning and an ensemble double DQN, each
//! optionally fed with feedback-graph side experiences.

mod config;
mod dqn;
mod mlp;
mod policy;
mod qtable;
mod replay;
mod training;

pub use config::{AgentConfig, AgentKind};
pub use dqn::DqnAgent;
pub use mlp::{Adam, EnsembleNet, Gradients, TrainBatch};
pub use policy::{act_epsilon_greedy, argmax};
pub use qtable::{q_update, q_update_with_fg, QTable, TabularAgent};
pub use replay::{BufferKind, ReplayBuffer};
pub use training::{run_training, Learner, RunLog, RunLogRow, TrainingSchedule};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Qtable,
    Dqn,
}

impl std::str::FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qtable" => Ok(AgentKind::Qtable),
            "dqn" => Ok(AgentKind::Dqn),
            other => Err(Error::Config(format!(
                "unknown agent '{other}' (expected qtable or dqn)"
            ))),
        }
    }
}

/// Learner hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub kind: AgentKind,
    pub epsilon: f64,
    /// Learner discount; falls back to the environment's `gamma` when unset.
    pub gamma: Option<f64>,
    /// Network step size.
    pub lr: f64,
    /// Tabular step size.
    pub alpha: f64,
    pub target_update_every: usize,
    pub batch_main: usize,
    pub batch_side: usize,
    pub buffer_main: usize,
    pub buffer_side: usize,
    pub hidden: usize,
    /// Multiplier applied to extrinsic rewards before learning.
    pub reward_scale: f64,
    /// Fraction of each batch a head trains on.
    pub bootstrap_p: f64,
    pub use_fg: bool,
    pub use_intrinsic: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            kind: AgentKind::Qtable,
            epsilon: 0.1,
            gamma: None,
            lr: 1e-4,
            alpha: 0.1,
            target_update_every: 100,
            batch_main: 128,
            batch_side: 256,
            buffer_main: 12_000,
            buffer_side: 192_000,
            hidden: 512,
            reward_scale: 1.0,
            bootstrap_p: 0.5,
            use_fg: false,
            use_intrinsic: false,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g <= 1.0) {
                return bad("gamma must lie in (0, 1]");
            }
        }
        if !(self.alpha >= 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in [0, 1]");
        }
        if !(self.lr > 0.0) || !(self.reward_scale > 0.0) {
            return bad("lr and reward_scale must be positive");
        }
        if !(self.bootstrap_p > 0.0 && self.bootstrap_p <= 1.0) {
            return bad("bootstrap_p must lie in (0, 1]");
        }
        if self.kind == AgentKind::Dqn
            && (self.batch_main == 0 || self.hidden == 0 || self.target_update_every == 0)
        {
            return bad("batch_main, hidden and target_update_every must be positive");
        }
        Ok(())
    }

    pub fn discount(&self, env_gamma: f64) -> f64 {
        self.gamma.unwrap_or(env_gamma)
    }
}

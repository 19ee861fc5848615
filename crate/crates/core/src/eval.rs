//! Policy rollouts and the average-cost readout shared by heuristics,
//! learned agents and the exact oracles.

use serde::{Deserialize, Serialize};

use crate::demand::DemandModel;
use crate::env::{SingleItemEnv, SingleItemState};
use crate::error::Result;
use crate::params::ItemParams;

/// A (possibly time-dependent) single-item ordering rule.
pub trait Policy {
    /// Order for period `t` (counted from the last reset) in `state`.
    fn act(&mut self, t: usize, state: &SingleItemState) -> u32;
}

impl<F: FnMut(usize, &SingleItemState) -> u32> Policy for F {
    fn act(&mut self, t: usize, state: &SingleItemState) -> u32 {
        self(t, state)
    }
}

/// Streams at or above this offset are reserved for evaluation rollouts,
/// so evaluation demand never overlaps training demand of the same seed.
pub const EVAL_STREAM_BASE: u64 = 1 << 40;

/// How a policy is scored: `episodes` rollouts from the empty state, the
/// first `warmup` periods discarded, the next `steps` periods averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalProtocol {
    pub episodes: usize,
    pub steps: usize,
    pub warmup: usize,
    pub seed: u64,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            episodes: 10,
            steps: 400,
            warmup: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    /// Mean cost per period over episodes.
    pub mean: f64,
    /// Sample standard deviation of the per-episode averages (0 for one episode).
    pub std: f64,
    pub episode_costs: Vec<f64>,
}

impl EvalResult {
    pub fn from_costs(episode_costs: Vec<f64>) -> Self {
        let n = episode_costs.len() as f64;
        let mean = episode_costs.iter().sum::<f64>() / n;
        let std = if episode_costs.len() > 1 {
            (episode_costs
                .iter()
                .map(|c| (c - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0))
                .sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std,
            episode_costs,
        }
    }

    /// Standard error of the mean.
    pub fn sem(&self) -> f64 {
        self.std / (self.episode_costs.len() as f64).sqrt()
    }
}

/// Average cost per period of `policy`; every episode restarts empty.
pub fn evaluate_policy<P: Policy + ?Sized>(
    policy: &mut P,
    params: &ItemParams,
    demand: &DemandModel,
    protocol: &EvalProtocol,
) -> Result<EvalResult> {
    let mut env = SingleItemEnv::with_demand_stream(
        params.clone(),
        demand.clone(),
        protocol.seed,
        EVAL_STREAM_BASE,
    )?;
    let mut costs = Vec::with_capacity(protocol.episodes);
    for episode in 0..protocol.episodes {
        env.reset_stream(protocol.seed, EVAL_STREAM_BASE + episode as u64);
        let mut total = 0.0;
        for t in 0..protocol.warmup + protocol.steps {
            let a = policy.act(t, env.state()).min(params.a_max);
            let exp = env.step(a)?;
            if t >= protocol.warmup {
                total -= exp.reward;
            }
        }
        costs.push(total / protocol.steps.max(1) as f64);
    }
    Ok(EvalResult::from_costs(costs))
}

use rand::Rng;

use super::stationary::{stationary, SparseChain};
use crate::demand::DemandModel;
use crate::env::{transition, SingleItemState, StateIndexer};
use crate::error::{Error, Result};
use crate::params::ItemParams;

/// Largest state-action count handled by the exact small-instance tools.
pub const MAX_TINY_PAIRS: usize = 10_000;

/// A small lost-sales instance with an explicit stationary behaviour policy.
#[derive(Debug, Clone)]
pub struct TinyMdp {
    pub params: ItemParams,
    pub demand: DemandModel,
    indexer: StateIndexer,
    /// `π_b(a|s)` laid out `[state][action]`.
    behavior: Vec<f64>,
}

impl TinyMdp {
    /// `y_max=5, a_max=2, L=1`, Poisson(1) demand clamped at 2, uniform policy.
    pub fn default_instance() -> Self {
        let params = ItemParams {
            y_max: 5,
            a_max: 2,
            lead_time: 1,
            d_max: 2,
            d_mean: 1.0,
            ..ItemParams::default()
        };
        let demand = DemandModel::poisson_clamped(1.0, 2).expect("valid demand");
        Self::uniform(params, demand).expect("valid tiny instance")
    }

    pub fn uniform(params: ItemParams, demand: DemandModel) -> Result<Self> {
        let indexer = StateIndexer::new(&params);
        let n = indexer
            .checked_len()
            .ok_or_else(|| Error::Size("state space overflow".into()))?;
        let a = params.num_actions();
        Self::with_behavior(params, demand, vec![1.0 / a as f64; n * a])
    }

    pub fn with_behavior(
        params: ItemParams,
        demand: DemandModel,
        behavior: Vec<f64>,
    ) -> Result<Self> {
        params.validate()?;
        let indexer = StateIndexer::new(&params);
        let pairs = indexer
            .checked_len()
            .and_then(|n| n.checked_mul(params.num_actions()))
            .filter(|&n| n <= MAX_TINY_PAIRS)
            .ok_or_else(|| Error::Size(format!("more than {MAX_TINY_PAIRS} state-action pairs")))?;
        if behavior.len() != pairs {
            return Err(Error::Config(
                "behaviour policy must give one probability per state-action pair".into(),
            ));
        }
        for row in behavior.chunks(params.num_actions()) {
            if row.iter().any(|p| !(*p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Config(
                    "behaviour policy rows must be probability vectors".into(),
                ));
            }
        }
        if demand.d_max() > params.y_max {
            return Err(Error::Config("demand support exceeds y_max".into()));
        }
        Ok(Self {
            params,
            demand,
            indexer,
            behavior,
        })
    }

    /// Same instance with demand fixed at `d`.
    pub fn with_constant_demand(&self, d: u32) -> Result<Self> {
        Self::with_behavior(
            self.params.clone(),
            DemandModel::deterministic(d),
            self.behavior.clone(),
        )
    }

    pub fn num_states(&self) -> usize {
        self.indexer.len()
    }

    pub fn num_actions(&self) -> usize {
        self.params.num_actions()
    }

    pub fn num_pairs(&self) -> usize {
        self.num_states() * self.num_actions()
    }

    pub fn state(&self, s: usize) -> SingleItemState {
        self.indexer.state(s)
    }

    pub fn state_index(&self, s: &SingleItemState) -> usize {
        self.indexer.index(s)
    }

    /// `(state, action)` of pair index `i`.
    pub fn pair(&self, i: usize) -> (SingleItemState, u32) {
        (
            self.state(i / self.num_actions()),
            (i % self.num_actions()) as u32,
        )
    }

    pub fn policy_row(&self, s: usize) -> &[f64] {
        let a = self.num_actions();
        &self.behavior[s * a..(s + 1) * a]
    }

    /// Successor state index for each demand value with positive mass.
    pub fn successors(&self, s: usize, a: u32) -> Vec<(u32, f64, usize)> {
        let state = self.state(s);
        self.demand
            .support()
            .filter(|&(_, p)| p > 0.0)
            .map(|(d, p)| {
                (
                    d,
                    p,
                    self.indexer
                        .index(&transition(&self.params, &state, a, d).next),
                )
            })
            .collect()
    }

    /// Chain over state-action pairs induced by the behaviour policy.
    pub fn pair_chain(&self) -> Result<SparseChain> {
        let na = self.num_actions();
        let mut rows = Vec::with_capacity(self.num_pairs());
        let mut scratch = vec![0.0; self.num_pairs()];
        for i in 0..self.num_pairs() {
            let mut touched = Vec::new();
            for (_, pd, next) in self.successors(i / na, (i % na) as u32) {
                for (a2, &pa) in self.policy_row(next).iter().enumerate() {
                    let j = next * na + a2;
                    if pa > 0.0 {
                        if scratch[j] == 0.0 {
                            touched.push(j);
                        }
                        scratch[j] += pd * pa;
                    }
                }
            }
            touched.sort_unstable();
            rows.push(
                touched
                    .iter()
                    .map(|&j| (j, std::mem::take(&mut scratch[j])))
                    .collect(),
            );
        }
        SparseChain::new(rows)
    }

    pub(crate) fn sample_action<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let row = self.policy_row(s);
        for (a, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return a as u32;
            }
        }
        (row.len() - 1) as u32
    }
}

/// Stationary law `μ(s,a)` of the behaviour chain over pairs.
pub fn stationary_distribution(mdp: &TinyMdp) -> Result<Vec<f64>> {
    stationary(&mdp.pair_chain()?, 1e-12)
}

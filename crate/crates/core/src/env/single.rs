use rand_chacha::ChaCha8Rng;

use super::seeded_rng;
use crate::demand::DemandModel;
use crate::error::{Error, Result};
use crate::params::ItemParams;

/// Post-receipt inventory plus the orders still in transit, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SingleItemState {
    pub y: u32,
    pub pipeline: Vec<u32>,
}

impl SingleItemState {
    pub fn empty(params: &ItemParams) -> Self {
        Self {
            y: 0,
            pipeline: vec![0; params.pipeline_len()],
        }
    }

    /// On-hand plus in-transit units.
    pub fn inventory_position(&self) -> u32 {
        self.y + self.pipeline.iter().sum::<u32>()
    }

    pub fn is_valid(&self, params: &ItemParams) -> bool {
        self.y <= params.y_max
            && self.pipeline.len() == params.pipeline_len()
            && self.pipeline.iter().all(|&a| a <= params.a_max)
    }
}

/// Result of applying one order against one demand realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub next: SingleItemState,
    pub reward: f64,
    pub demand_obs: u32,
    pub censored: bool,
}

/// One stored transition `(s, a, r, s', d_obs)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: SingleItemState,
    pub action: u32,
    pub reward: f64,
    pub next: SingleItemState,
    pub demand_obs: u32,
    pub censored: bool,
}

/// Lost-sales dynamics for a known demand `d`.
///
/// Inventory after receipt becomes `min([y-d]^+ + arriving, y_max)`, where
/// the arriving order is the head of the pipeline (or `a` itself when the
/// lead time is one period). Overflow above `y_max` is discarded at no cost.
pub fn transition(params: &ItemParams, state: &SingleItemState, a: u32, d: u32) -> Transition {
    let leftover = state.y.saturating_sub(d);
    let (arriving, pipeline) = match state.pipeline.split_first() {
        Some((&head, rest)) => {
            let mut next = Vec::with_capacity(state.pipeline.len());
            next.extend_from_slice(rest);
            next.push(a);
            (head, next)
        }
        None => (a, Vec::new()),
    };
    let demand_obs = d.min(state.y);
    Transition {
        next: SingleItemState {
            y: (leftover + arriving).min(params.y_max),
            pipeline,
        },
        reward: -params.period_cost(state.y, a, d),
        demand_obs,
        censored: demand_obs == state.y,
    }
}

/// Mixed-radix indexing of single-item states: `y` is the most significant
/// digit (radix `y_max+1`), then each pipeline slot (radix `a_max+1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateIndexer {
    pub y_max: u32,
    pub a_max: u32,
    pub pipeline_len: usize,
}

impl StateIndexer {
    pub fn new(params: &ItemParams) -> Self {
        Self {
            y_max: params.y_max,
            a_max: params.a_max,
            pipeline_len: params.pipeline_len(),
        }
    }

    /// Number of states, or `None` on overflow.
    pub fn checked_len(&self) -> Option<usize> {
        let radix = self.a_max as usize + 1;
        let mut n = self.y_max as usize + 1;
        for _ in 0..self.pipeline_len {
            n = n.checked_mul(radix)?;
        }
        Some(n)
    }

    pub fn len(&self) -> usize {
        self.checked_len().expect("state space overflows usize")
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, state: &SingleItemState) -> usize {
        let radix = self.a_max as usize + 1;
        state
            .pipeline
            .iter()
            .fold(state.y as usize, |acc, &a| acc * radix + a as usize)
    }

    pub fn state(&self, mut index: usize) -> SingleItemState {
        let radix = self.a_max as usize + 1;
        let mut pipeline = vec![0; self.pipeline_len];
        for slot in pipeline.iter_mut().rev() {
            *slot = (index % radix) as u32;
            index /= radix;
        }
        SingleItemState {
            y: index as u32,
            pipeline,
        }
    }
}

/// Single-item environment owning its demand stream.
#[derive(Debug, Clone)]
pub struct SingleItemEnv {
    params: ItemParams,
    demand: DemandModel,
    rng: ChaCha8Rng,
    state: SingleItemState,
}

impl SingleItemEnv {
    /// Environment with clamped Poisson demand from `params`.
    pub fn new(params: ItemParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let demand = DemandModel::poisson_clamped(params.d_mean, params.d_max)?;
        Self::with_demand(params, demand, seed)
    }

    pub fn with_demand(params: ItemParams, demand: DemandModel, seed: u64) -> Result<Self> {
        Self::with_demand_stream(params, demand, seed, 0)
    }

    pub fn with_demand_stream(
        params: ItemParams,
        demand: DemandModel,
        seed: u64,
        stream: u64,
    ) -> Result<Self> {
        params.validate()?;
        let state = SingleItemState::empty(&params);
        Ok(Self {
            params,
            demand,
            rng: seeded_rng(seed, stream),
            state,
        })
    }

    /// Empties the system and reseeds the demand stream.
    pub fn reset(&mut self, seed: u64) -> &SingleItemState {
        self.reset_stream(seed, 0)
    }

    pub fn reset_stream(&mut self, seed: u64, stream: u64) -> &SingleItemState {
        self.rng = seeded_rng(seed, stream);
        self.state = SingleItemState::empty(&self.params);
        &self.state
    }

    pub fn params(&self) -> &ItemParams {
        &self.params
    }

    pub fn demand(&self) -> &DemandModel {
        &self.demand
    }

    pub fn state(&self) -> &SingleItemState {
        &self.state
    }

    /// Overrides the current state (for tests and warm starts).
    pub fn set_state(&mut self, state: SingleItemState) -> Result<()> {
        if !state.is_valid(&self.params) {
            return Err(Error::Config(format!("state {state:?} is out of bounds")));
        }
        self.state = state;
        Ok(())
    }

    pub fn sample_demand(&mut self) -> u32 {
        self.demand.sample(&mut self.rng)
    }

    pub fn step(&mut self, a: u32) -> Result<Experience> {
        self.check_action(a)?;
        let d = self.sample_demand();
        Ok(self.apply(a, d))
    }

    /// Steps with a caller-supplied demand instead of a draw.
    pub fn step_with_demand(&mut self, a: u32, d: u32) -> Result<Experience> {
        self.check_action(a)?;
        Ok(self.apply(a, d))
    }

    fn check_action(&self, a: u32) -> Result<()> {
        if a > self.params.a_max {
            return Err(Error::Action(format!(
                "order {a} exceeds a_max {}",
                self.params.a_max
            )));
        }
        Ok(())
    }

    fn apply(&mut self, a: u32, d: u32) -> Experience {
        let t = transition(&self.params, &self.state, a, d);
        let state = std::mem::replace(&mut self.state, t.next.clone());
        Experience {
            state,
            action: a,
            reward: t.reward,
            next: t.next,
            demand_obs: t.demand_obs,
            censored: t.censored,
        }
    }
}

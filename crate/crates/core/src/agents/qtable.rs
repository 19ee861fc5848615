use rand::Rng;

use super::policy::{act_epsilon_greedy, argmax};
use super::training::Learner;
use super::AgentConfig;
use crate::env::{Experience, SingleItemState, StateIndexer};
use crate::error::{Error, Result};
use crate::fg::{self, FeedbackGraphSpec};
use crate::params::ItemParams;

/// Dense action-value table over mixed-radix state indices, zero-initialised
/// (optimistic, since every return is non-positive).
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    indexer: StateIndexer,
    actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(params: &ItemParams) -> Result<Self> {
        let indexer = StateIndexer::new(params);
        let actions = params.num_actions();
        let len = indexer
            .checked_len()
            .and_then(|n| n.checked_mul(actions))
            .filter(|&n| n <= 1 << 28)
            .ok_or_else(|| {
                Error::Size("Q-table exceeds 2^28 entries; reduce L, y_max or a_max".into())
            })?;
        Ok(Self {
            indexer,
            actions,
            values: vec![0.0; len],
        })
    }

    pub fn num_actions(&self) -> usize {
        self.actions
    }

    pub fn num_states(&self) -> usize {
        self.indexer.len()
    }

    pub fn indexer(&self) -> &StateIndexer {
        &self.indexer
    }

    pub fn values(&self, state: &SingleItemState) -> &[f64] {
        let base = self.indexer.index(state) * self.actions;
        &self.values[base..base + self.actions]
    }

    pub fn get(&self, state: &SingleItemState, a: u32) -> f64 {
        self.values(state)[a as usize]
    }

    pub fn set(&mut self, state: &SingleItemState, a: u32, v: f64) {
        let i = self.indexer.index(state) * self.actions + a as usize;
        self.values[i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn greedy(&self, state: &SingleItemState) -> u32 {
        argmax(self.values(state)) as u32
    }
}

/// `Q(s,a) += alpha·(r + gamma·max_a' Q(s',a') − Q(s,a))`.
pub fn q_update(table: &mut QTable, exp: &Experience, alpha: f64, gamma: f64) {
    let target = exp.reward
        + gamma
            * table
                .values(&exp.next)
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
    let i = table.indexer.index(&exp.state) * table.actions + exp.action as usize;
    table.values[i] += alpha * (target - table.values[i]);
}

/// Updates on `exp`, then on each of its side experiences in enumeration
/// order (subsampled with `rng` if the spec carries a cap). Returns the
/// number of side updates.
pub fn q_update_with_fg<R: Rng + ?Sized>(
    table: &mut QTable,
    exp: &Experience,
    spec: &FeedbackGraphSpec,
    params: &ItemParams,
    alpha: f64,
    gamma: f64,
    rng: &mut R,
) -> usize {
    q_update(table, exp, alpha, gamma);
    if spec.cap_side_per_experience.is_none() {
        let mut n = 0;
        fg::for_each_side_pair(exp, spec, params, |s, a| {
            q_update(
                table,
                &fg::replay(params, s, a, exp.demand_obs),
                alpha,
                gamma,
            );
            n += 1;
        });
        n
    } else {
        let side = fg::generate_capped(exp, spec, params, 0, rng);
        for s in &side {
            q_update(table, &s.experience, alpha, gamma);
        }
        side.len()
    }
}

/// Epsilon-greedy tabular Q-learner.
#[derive(Debug, Clone)]
pub struct TabularAgent {
    pub table: QTable,
    params: ItemParams,
    config: AgentConfig,
    fg: FeedbackGraphSpec,
    gamma: f64,
}

impl TabularAgent {
    pub fn new(params: &ItemParams, config: AgentConfig, fg: FeedbackGraphSpec) -> Result<Self> {
        config.validate()?;
        fg.validate(params)?;
        Ok(Self {
            table: QTable::new(params)?,
            params: params.clone(),
            gamma: config.discount(params.gamma),
            config,
            fg,
        })
    }
}

impl Learner for TabularAgent {
    fn act(&mut self, state: &SingleItemState, rng: &mut rand_chacha::ChaCha8Rng) -> u32 {
        act_epsilon_greedy(self.table.values(state), self.config.epsilon, rng)
    }

    fn learn(
        &mut self,
        exp: &Experience,
        _source_id: u64,
        _beta: f64,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<()> {
        let scaled = Experience {
            reward: exp.reward * self.config.reward_scale,
            ..exp.clone()
        };
        if self.config.use_fg {
            q_update_with_fg(
                &mut self.table,
                &scaled,
                &self.fg,
                &self.params,
                self.config.alpha,
                self.gamma,
                rng,
            );
        } else {
            q_update(&mut self.table, &scaled, self.config.alpha, self.gamma);
        }
        Ok(())
    }

    fn greedy(&mut self, state: &SingleItemState) -> u32 {
        self.table.greedy(state)
    }
}

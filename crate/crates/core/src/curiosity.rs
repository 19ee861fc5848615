//! Ensemble-disagreement curiosity and the side-experience-weighted
//! intrinsic reward.

use serde::{Deserialize, Serialize};

use crate::env::{Experience, SingleItemState};
use crate::error::{Error, Result};
use crate::fg::{self, FeedbackGraphSpec, SideExperience};
use crate::params::ItemParams;

/// An action-value model with `num_heads` heads over a shared action set.
pub trait EnsembleValueModel {
    fn num_heads(&self) -> usize;
    fn num_actions(&self) -> usize;

    /// Head values for a batch of states, laid out `[state][head][action]`.
    fn head_values_batch(&self, states: &[SingleItemState]) -> Vec<f64>;

    fn head_values(&self, state: &SingleItemState) -> Vec<f64> {
        self.head_values_batch(std::slice::from_ref(state))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntrinsicRewardConfig {
    pub beta0: f64,
    /// Multiplicative decay of the weight per training episode.
    pub beta_decay: f64,
    pub heads: usize,
}

impl Default for IntrinsicRewardConfig {
    fn default() -> Self {
        Self {
            beta0: 0.01,
            beta_decay: 0.9,
            heads: 5,
        }
    }
}

impl IntrinsicRewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta0) {
            return Err(Error::Config(format!(
                "beta0 = {} outside [0, 1]",
                self.beta0
            )));
        }
        if !(self.beta_decay > 0.0 && self.beta_decay <= 1.0) {
            return Err(Error::Config(format!(
                "beta_decay = {} outside (0, 1]",
                self.beta_decay
            )));
        }
        if self.heads < 2 {
            return Err(Error::Config(
                "at least two heads are needed for disagreement".into(),
            ));
        }
        Ok(())
    }

    /// Weight used during (0-based) training episode `episode`.
    pub fn beta_at(&self, episode: usize) -> f64 {
        self.beta0 * self.beta_decay.powi(episode as i32)
    }
}

/// `(1/M)·sqrt(Σ_m (Q_m − Q̄)²)` over the given head values.
pub fn head_disagreement(values: &[f64]) -> Result<f64> {
    let m = values.len();
    if m < 2 {
        return Err(Error::Config(format!(
            "disagreement needs at least two heads, got {m}"
        )));
    }
    Ok(spread(values.iter().copied(), m))
}

fn spread(values: impl Iterator<Item = f64> + Clone, m: usize) -> f64 {
    let mean = values.clone().sum::<f64>() / m as f64;
    let ss: f64 = values.map(|q| (q - mean) * (q - mean)).sum();
    ss.sqrt() / m as f64
}

/// Disagreement at `(state, action)` from one row of `[head][action]` values.
fn disagreement_in_row(row: &[f64], heads: usize, actions: usize, action: u32) -> f64 {
    let a = action as usize;
    spread((0..heads).map(|m| row[m * actions + a]), heads)
}

/// Disagreement of `model` at `(state, action)`.
pub fn disagreement_at<M: EnsembleValueModel + ?Sized>(
    model: &M,
    state: &SingleItemState,
    action: u32,
) -> Result<f64> {
    if model.num_heads() < 2 {
        return Err(Error::Config(
            "disagreement needs at least two heads".into(),
        ));
    }
    let row = model.head_values(state);
    Ok(disagreement_in_row(
        &row,
        model.num_heads(),
        model.num_actions(),
        action,
    ))
}

/// Combines own curiosity with side curiosities: `own + log10(J)·mean(side)`.
/// An empty side list yields `own`.
pub fn combine(own: f64, side_sum: f64, count: usize) -> f64 {
    if count == 0 {
        own
    } else {
        own + (count as f64).log10() * side_sum / count as f64
    }
}

/// Intrinsic reward of `exp` given its side experiences.
pub fn intrinsic_reward<M: EnsembleValueModel + ?Sized>(
    exp: &Experience,
    side: &[SideExperience],
    model: &M,
) -> Result<f64> {
    let (heads, actions) = (model.num_heads(), model.num_actions());
    if heads < 2 {
        return Err(Error::Config(
            "disagreement needs at least two heads".into(),
        ));
    }
    // Each distinct state is evaluated once.
    let mut states: Vec<SingleItemState> = vec![exp.state.clone()];
    let mut slot = Vec::with_capacity(side.len());
    for s in side {
        let pos = match states.iter().rposition(|x| *x == s.experience.state) {
            Some(p) => p,
            None => {
                states.push(s.experience.state.clone());
                states.len() - 1
            }
        };
        slot.push(pos);
    }
    let values = model.head_values_batch(&states);
    let width = heads * actions;
    let row = |i: usize| &values[i * width..(i + 1) * width];
    let own = disagreement_in_row(row(0), heads, actions, exp.action);
    let side_sum: f64 = side
        .iter()
        .zip(&slot)
        .map(|(s, &i)| disagreement_in_row(row(i), heads, actions, s.experience.action))
        .sum();
    Ok(combine(own, side_sum, side.len()))
}

/// Intrinsic reward over the full (uncapped) side-experience set of `exp`,
/// without materialising the side transitions. Equal to
/// `intrinsic_reward(exp, &generate_side_experiences(..), model)` up to
/// summation order.
pub fn intrinsic_reward_full<M: EnsembleValueModel + ?Sized>(
    exp: &Experience,
    spec: &FeedbackGraphSpec,
    params: &ItemParams,
    model: &M,
) -> Result<f64> {
    let (heads, actions) = (model.num_heads(), model.num_actions());
    if heads < 2 {
        return Err(Error::Config(
            "disagreement needs at least two heads".into(),
        ));
    }
    let mut states = vec![exp.state.clone()];
    fg::for_each_side_pair(exp, spec, params, |s, a| {
        if a == 0 {
            states.push(s.clone());
        }
    });
    let values = model.head_values_batch(&states);
    let width = heads * actions;
    let own = disagreement_in_row(&values[..width], heads, actions, exp.action);
    let side_sum: f64 = values[width..]
        .chunks_exact(width)
        .map(|row| {
            (0..actions as u32)
                .map(|a| disagreement_in_row(row, heads, actions, a))
                .sum::<f64>()
        })
        .sum();
    Ok(combine(own, side_sum, (states.len() - 1) * actions))
}

/// `(1−β)·r + β·r_in`.
pub fn mix_reward(r: f64, r_in: f64, beta: f64) -> f64 {
    (1.0 - beta) * r + beta * r_in
}

/// Ensemble of dense tables, one per head, over `[state index][action]`.
#[derive(Debug, Clone)]
pub struct TabularEnsemble {
    indexer: crate::env::StateIndexer,
    actions: usize,
    heads: Vec<Vec<f64>>,
}

impl TabularEnsemble {
    pub fn new(params: &ItemParams, heads: usize) -> Result<Self> {
        let indexer = crate::env::StateIndexer::new(params);
        let n = indexer
            .checked_len()
            .and_then(|s| s.checked_mul(params.num_actions()))
            .ok_or_else(|| Error::Size("state-action table too large".into()))?;
        Ok(Self {
            indexer,
            actions: params.num_actions(),
            heads: vec![vec![0.0; n]; heads],
        })
    }

    pub fn set(&mut self, head: usize, state: &SingleItemState, action: u32, value: f64) {
        let i = self.indexer.index(state) * self.actions + action as usize;
        self.heads[head][i] = value;
    }
}

impl EnsembleValueModel for TabularEnsemble {
    fn num_heads(&self) -> usize {
        self.heads.len()
    }

    fn num_actions(&self) -> usize {
        self.actions
    }

    fn head_values_batch(&self, states: &[SingleItemState]) -> Vec<f64> {
        let mut out = Vec::with_capacity(states.len() * self.heads.len() * self.actions);
        for s in states {
            let base = self.indexer.index(s) * self.actions;
            for head in &self.heads {
                out.extend_from_slice(&head[base..base + self.actions]);
            }
        }
        out
    }
}

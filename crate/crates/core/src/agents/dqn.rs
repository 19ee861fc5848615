use std::collections::HashMap;

use ndarray::{s, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::mlp::{Adam, EnsembleNet, TrainBatch};
use super::policy::{act_epsilon_greedy, argmax};
use super::replay::{BufferKind, ReplayBuffer};
use super::training::Learner;
use super::AgentConfig;
use crate::curiosity::{self, EnsembleValueModel};
use crate::env::{seeded_rng, Experience, SingleItemState};
use crate::error::Result;
use crate::fg::{self, FeedbackGraphSpec};
use crate::params::ItemParams;

const INIT_STREAM: u64 = 1 << 42;
const CURIOSITY_STREAM: u64 = 1 << 43;
/// Rows per forward pass when scoring side states, bounding peak memory.
const FORWARD_CHUNK: usize = 4096;

/// Double DQN over an ensemble of heads. The head mean drives control; the
/// spread between heads drives the intrinsic reward.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    config: AgentConfig,
    params: ItemParams,
    fg: FeedbackGraphSpec,
    gamma: f64,
    online: EnsembleNet,
    target: EnsembleNet,
    adam: Adam,
    main: ReplayBuffer,
    side: ReplayBuffer,
    updates: usize,
    /// Used only for subsampling side experiences when scoring curiosity,
    /// so enabling the intrinsic reward never perturbs the other streams.
    curiosity_rng: ChaCha8Rng,
    last_intrinsic: f64,
}

impl DqnAgent {
    pub fn new(
        params: &ItemParams,
        config: AgentConfig,
        fg: FeedbackGraphSpec,
        heads: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        fg.validate(params)?;
        params.validate()?;
        let mut init = seeded_rng(seed, INIT_STREAM);
        let online = EnsembleNet::new(
            params.lead_time,
            config.hidden,
            heads.max(1),
            params.num_actions(),
            &mut init,
        );
        Ok(Self {
            adam: Adam::new(&online, config.lr),
            target: online.clone(),
            online,
            gamma: config.discount(params.gamma),
            main: ReplayBuffer::new(BufferKind::Main, config.buffer_main),
            side: ReplayBuffer::new(BufferKind::Side, config.buffer_side),
            updates: 0,
            curiosity_rng: seeded_rng(seed, CURIOSITY_STREAM),
            last_intrinsic: 0.0,
            params: params.clone(),
            config,
            fg,
        })
    }

    pub fn network(&self) -> &EnsembleNet {
        &self.online
    }

    pub fn main_buffer(&self) -> &ReplayBuffer {
        &self.main
    }

    pub fn side_buffer(&self) -> &ReplayBuffer {
        &self.side
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    /// Mean intrinsic reward over the last trained batch.
    pub fn last_intrinsic(&self) -> f64 {
        self.last_intrinsic
    }

    /// Scales inventory by `y_max` and each pipeline slot by `a_max`.
    pub fn encode<'a>(
        &self,
        states: impl ExactSizeIterator<Item = &'a SingleItemState>,
    ) -> Array2<f64> {
        let l = self.params.lead_time;
        let mut x = Array2::zeros((states.len(), l));
        let (ys, as_) = (self.params.y_max as f64, self.params.a_max as f64);
        for (i, s) in states.enumerate() {
            x[[i, 0]] = s.y as f64 / ys;
            for (j, &a) in s.pipeline.iter().enumerate() {
                x[[i, j + 1]] = a as f64 / as_;
            }
        }
        x
    }

    fn forward_chunked(&self, states: &[SingleItemState]) -> Array2<f64> {
        let width = self.online.heads() * self.online.actions();
        let mut out = Array2::zeros((states.len(), width));
        for (c, chunk) in states.chunks(FORWARD_CHUNK).enumerate() {
            let start = c * FORWARD_CHUNK;
            let y = self.online.forward(&self.encode(chunk.iter()));
            out.slice_mut(s![start..start + chunk.len(), ..]).assign(&y);
        }
        out
    }

    /// Head-mean action values at `state`.
    pub fn mean_values(&self, state: &SingleItemState) -> Vec<f64> {
        let out = self.online.forward(&self.encode(std::iter::once(state)));
        let (h, a) = (self.online.heads(), self.online.actions());
        (0..a)
            .map(|j| (0..h).map(|m| out[[0, m * a + j]]).sum::<f64>() / h as f64)
            .collect()
    }

    /// Intrinsic rewards for a batch, scoring each distinct state once.
    fn intrinsic_rewards(&mut self, batch: &[&Experience]) -> Vec<f64> {
        let actions = self.params.num_actions();
        let mut rows: Vec<SingleItemState> = Vec::new();
        let mut row_of: HashMap<SingleItemState, usize> = HashMap::new();
        let mut row_for = |s: &SingleItemState, rows: &mut Vec<SingleItemState>| -> usize {
            *row_of.entry(s.clone()).or_insert_with(|| {
                rows.push(s.clone());
                rows.len() - 1
            })
        };
        // per experience: own row, side (row, action) pairs (None = all actions), J
        let mut plan: Vec<(usize, Vec<(usize, Option<u32>)>, usize)> =
            Vec::with_capacity(batch.len());
        for exp in batch {
            let own = row_for(&exp.state, &mut rows);
            let mut side = Vec::new();
            let count;
            if self.fg.cap_side_per_experience.is_none() {
                fg::for_each_side_pair(exp, &self.fg, &self.params, |s, a| {
                    if a == 0 {
                        side.push((row_for(s, &mut rows), None));
                    }
                });
                count = side.len() * actions;
            } else {
                let picked =
                    fg::generate_capped(exp, &self.fg, &self.params, 0, &mut self.curiosity_rng);
                for p in &picked {
                    side.push((
                        row_for(&p.experience.state, &mut rows),
                        Some(p.experience.action),
                    ));
                }
                count = picked.len();
            }
            plan.push((own, side, count));
        }
        let values = self.forward_chunked(&rows);
        let heads = self.online.heads();
        let spread_at = |row: usize, a: u32| -> f64 {
            let r = values.row(row);
            let qs = (0..heads).map(|m| r[m * actions + a as usize]);
            let mean = qs.clone().sum::<f64>() / heads as f64;
            qs.map(|q| (q - mean) * (q - mean)).sum::<f64>().sqrt() / heads as f64
        };
        batch
            .iter()
            .zip(&plan)
            .map(|(exp, (own, side, count))| {
                let own_c = spread_at(*own, exp.action);
                let side_sum: f64 = side
                    .iter()
                    .map(|&(row, a)| match a {
                        Some(a) => spread_at(row, a),
                        None => (0..actions as u32).map(|a| spread_at(row, a)).sum(),
                    })
                    .sum();
                curiosity::combine(own_c, side_sum, *count)
            })
            .collect()
    }

    /// One gradient step on a fresh batch; `None` until the main buffer
    /// holds a full batch.
    pub fn train_step(&mut self, beta: f64, rng: &mut ChaCha8Rng) -> Option<f64> {
        if self.main.len() < self.config.batch_main {
            return None;
        }
        let mut batch: Vec<Experience> = self
            .main
            .sample(self.config.batch_main, rng)
            .into_iter()
            .cloned()
            .collect();
        if self.config.use_fg && !self.side.is_empty() {
            batch.extend(
                self.side
                    .sample(self.config.batch_side, rng)
                    .into_iter()
                    .cloned(),
            );
        }
        let refs: Vec<&Experience> = batch.iter().collect();
        let scale = self.config.reward_scale;
        let mut rewards: Vec<f64> = batch.iter().map(|e| e.reward * scale).collect();
        if self.config.use_intrinsic && self.online.heads() >= 2 {
            let r_in = self.intrinsic_rewards(&refs);
            self.last_intrinsic = r_in.iter().sum::<f64>() / r_in.len() as f64;
            for (r, ri) in rewards.iter_mut().zip(r_in) {
                *r = curiosity::mix_reward(*r, ri, beta);
            }
        }

        let heads = self.online.heads();
        let actions = self.online.actions();
        let next = self.encode(batch.iter().map(|e| &e.next));
        let q_online = self.online.forward(&next);
        let q_target = self.target.forward(&next);
        let mut targets = Array2::zeros((batch.len(), heads));
        for i in 0..batch.len() {
            for m in 0..heads {
                let cols = m * actions..(m + 1) * actions;
                let row = q_online.slice(s![i, cols.clone()]);
                let best = argmax(row.as_slice().expect("row-major output"));
                targets[[i, m]] = rewards[i] + self.gamma * q_target[[i, m * actions + best]];
            }
        }
        let p = self.config.bootstrap_p;
        let mask = Array2::from_shape_simple_fn((batch.len(), heads), || {
            if p >= 1.0 {
                1.0
            } else {
                f64::from(rng.random_bool(p))
            }
        });
        let train = TrainBatch {
            inputs: self.encode(batch.iter().map(|e| &e.state)),
            actions: batch.iter().map(|e| e.action as usize).collect(),
            targets,
            mask,
        };
        let (loss, grads) = self.online.loss_and_grad(&train);
        self.adam.step(&mut self.online, &grads);
        self.updates += 1;
        if self.updates % self.config.target_update_every == 0 {
            self.target = self.online.clone();
        }
        Some(loss)
    }
}

impl EnsembleValueModel for DqnAgent {
    fn num_heads(&self) -> usize {
        self.online.heads()
    }

    fn num_actions(&self) -> usize {
        self.online.actions()
    }

    fn head_values_batch(&self, states: &[SingleItemState]) -> Vec<f64> {
        self.forward_chunked(states).into_iter().collect()
    }
}

impl Learner for DqnAgent {
    fn act(&mut self, state: &SingleItemState, rng: &mut ChaCha8Rng) -> u32 {
        act_epsilon_greedy(&self.mean_values(state), self.config.epsilon, rng)
    }

    fn learn(
        &mut self,
        exp: &Experience,
        source_id: u64,
        beta: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        self.main.push(exp.clone());
        if self.config.use_fg {
            for side in fg::generate_capped(exp, &self.fg, &self.params, source_id, rng) {
                self.side.push(side.experience);
            }
        }
        self.train_step(beta, rng);
        Ok(())
    }

    fn greedy(&mut self, state: &SingleItemState) -> u32 {
        argmax(&self.mean_values(state)) as u32
    }
}

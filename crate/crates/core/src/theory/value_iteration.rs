//! Discounted value iteration over the full single-item state space, and
//! exact long-run cost of the resulting stationary policy.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use super::stationary::{stationary, SparseChain};
use crate::demand::DemandModel;
use crate::env::{transition, SingleItemState, StateIndexer};
use crate::error::{Error, Result};
use crate::eval::Policy;
use crate::params::ItemParams;

/// Default ceiling on the number of states value iteration will enumerate.
pub const DEFAULT_STATE_BUDGET: usize = 2_000_000;

/// A deterministic stationary policy stored as one action per state index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TabularPolicy {
    pub indexer: StateIndexer,
    pub actions: Vec<u8>,
}

impl TabularPolicy {
    pub fn action(&self, state: &SingleItemState) -> u32 {
        self.actions[self.indexer.index(state)] as u32
    }

    /// Little-endian `u32` header `(y_max, a_max, L)` followed by one action
    /// byte per state in mixed-radix order.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        for v in [
            self.indexer.y_max,
            self.indexer.a_max,
            self.indexer.pipeline_len as u32 + 1,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.actions)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|m| Error::parse(path, m))
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < 12 {
            return Err("policy file shorter than its header".into());
        }
        let word =
            |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4 bytes"));
        let (y_max, a_max, l) = (word(0), word(1), word(2));
        if l == 0 {
            return Err("lead time must be at least 1".into());
        }
        let indexer = StateIndexer {
            y_max,
            a_max,
            pipeline_len: l as usize - 1,
        };
        let n = indexer.checked_len().ok_or("state space overflows")?;
        let actions = bytes[12..].to_vec();
        if actions.len() != n {
            return Err(format!(
                "expected {n} action bytes, found {}",
                actions.len()
            ));
        }
        if actions.iter().any(|&a| a as u32 > a_max) {
            return Err("action byte exceeds a_max".into());
        }
        Ok(Self { indexer, actions })
    }
}

impl Policy for TabularPolicy {
    fn act(&mut self, _t: usize, state: &SingleItemState) -> u32 {
        self.action(state)
    }
}

#[derive(Debug, Clone)]
pub struct ValueIterationResult {
    /// Optimal discounted cost per state (a cost, so non-negative).
    pub values: Vec<f64>,
    pub policy: TabularPolicy,
    pub sweeps: usize,
    /// Sup-norm change of each sweep.
    pub residuals: Vec<f64>,
}

/// Shared transition structure: `next(s, a, d) = y'(y, p0, d)·R^{L−1} + tail(s)·R + a`.
struct Model {
    indexer: StateIndexer,
    radix: usize,
    /// `R^{L−1}`: stride of the inventory digit.
    stride: usize,
    pmf: Vec<f64>,
    /// Expected holding plus penalty cost at each on-hand level.
    level_cost: Vec<f64>,
    params: ItemParams,
}

impl Model {
    fn new(params: &ItemParams, demand: &DemandModel, budget: usize) -> Result<Self> {
        params.validate()?;
        if params.a_max > u8::MAX as u32 {
            return Err(Error::Config(
                "a_max above 255 cannot be stored as action bytes".into(),
            ));
        }
        let indexer = StateIndexer::new(params);
        let n = indexer
            .checked_len()
            .filter(|&n| n <= budget)
            .ok_or_else(|| {
                Error::Size(format!(
                    "{} states exceed the budget of {budget}; use a shorter lead time",
                    indexer
                        .checked_len()
                        .map_or("too many".to_string(), |n| n.to_string())
                ))
            })?;
        let radix = params.num_actions();
        let pmf = demand.pmf().to_vec();
        let level_cost = (0..=params.y_max)
            .map(|y| {
                pmf.iter()
                    .enumerate()
                    .map(|(d, p)| p * params.period_cost(y, 0, d as u32))
                    .sum()
            })
            .collect();
        Ok(Self {
            indexer,
            radix,
            stride: n / (params.y_max as usize + 1),
            pmf,
            level_cost,
            params: params.clone(),
        })
    }

    fn len(&self) -> usize {
        self.indexer.len()
    }

    /// `(y, arriving, tail)` of state `s`, where `tail` indexes the
    /// pipeline after the arriving slot.
    fn split(&self, s: usize) -> (usize, u32, usize) {
        let y = s / self.stride;
        let rest = s % self.stride;
        if self.stride == 1 {
            (y, u32::MAX, 0)
        } else {
            let sub = self.stride / self.radix;
            (y, (rest / sub) as u32, rest % sub)
        }
    }

    /// Index of the successor for on-hand `y`, demand `d`, arriving `arr`.
    fn next_level(&self, y: usize, d: usize, arrived: u32) -> usize {
        (y.saturating_sub(d) + arrived as usize).min(self.params.y_max as usize)
    }

    fn q_values(&self, s: usize, v: &[f64], gamma: f64, out: &mut [f64]) {
        let (y, arr, tail) = self.split(s);
        let base = self.level_cost[y];
        for (a, q) in out.iter_mut().enumerate() {
            let arriving = if self.stride == 1 { a as u32 } else { arr };
            let tail_next = if self.stride == 1 {
                0
            } else {
                tail * self.radix + a
            };
            let mut ev = 0.0;
            for (d, &p) in self.pmf.iter().enumerate() {
                ev += p * v[self.next_level(y, d, arriving) * self.stride + tail_next];
            }
            *q = self.params.c * a as f64 + base + gamma * ev;
        }
    }
}

fn argmin(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in q.iter().enumerate().skip(1) {
        if x < q[best] {
            best = i;
        }
    }
    best
}

/// Synchronous value iteration on expected discounted cost until the
/// sup-norm change falls to `tol`, then the greedy (lowest-order on ties)
/// policy.
pub fn value_iteration(
    params: &ItemParams,
    demand: &DemandModel,
    tol: f64,
    state_budget: usize,
) -> Result<ValueIterationResult> {
    if !(tol > 0.0) {
        return Err(Error::Config("tolerance must be positive".into()));
    }
    let model = Model::new(params, demand, state_budget)?;
    let gamma = params.gamma;
    if gamma >= 1.0 {
        return Err(Error::Config("value iteration needs gamma < 1".into()));
    }
    let n = model.len();
    let na = params.num_actions();
    let mut v = vec![0.0; n];
    let mut residuals = Vec::new();
    loop {
        let next: Vec<f64> = (0..n)
            .into_par_iter()
            .map_init(
                || vec![0.0; na],
                |q, s| {
                    model.q_values(s, &v, gamma, q);
                    q.iter().copied().fold(f64::INFINITY, f64::min)
                },
            )
            .collect();
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if let Some(&prev) = residuals.last() {
            // contraction: each sweep shrinks the change by at least gamma,
            // up to rounding in values whose magnitude is `scale`
            let scale = next.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            debug_assert!(
                delta <= gamma * prev + 64.0 * f64::EPSILON * scale,
                "sweep change grew: {prev} -> {delta}"
            );
        }
        residuals.push(delta);
        v = next;
        if delta <= tol || residuals.len() >= 1_000_000 {
            break;
        }
    }
    let actions: Vec<u8> = (0..n)
        .into_par_iter()
        .map_init(
            || vec![0.0; na],
            |q, s| {
                model.q_values(s, &v, gamma, q);
                argmin(q) as u8
            },
        )
        .collect();
    Ok(ValueIterationResult {
        sweeps: residuals.len(),
        residuals,
        values: v,
        policy: TabularPolicy {
            indexer: model.indexer,
            actions,
        },
    })
}

/// Exact long-run average cost per period of `policy` started from the
/// empty state: the stationary law of the chain restricted to states
/// reachable from empty, weighted by expected period cost.
pub fn stationary_average_cost(
    params: &ItemParams,
    demand: &DemandModel,
    policy: &TabularPolicy,
) -> Result<f64> {
    let indexer = StateIndexer::new(params);
    if indexer != policy.indexer {
        return Err(Error::Config(
            "policy was built for different bounds".into(),
        ));
    }
    let support: Vec<(u32, f64)> = demand.support().filter(|&(_, p)| p > 0.0).collect();
    // breadth-first over reachable states, relabelled densely
    let start = indexer.index(&SingleItemState::empty(params));
    let mut label = std::collections::HashMap::new();
    let mut order = vec![start];
    label.insert(start, 0usize);
    let mut rows = Vec::new();
    let mut costs = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let s = indexer.state(order[i]);
        let a = policy.actions[order[i]] as u32;
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut cost = 0.0;
        for &(d, p) in &support {
            let t = transition(params, &s, a, d);
            cost -= p * t.reward;
            let idx = indexer.index(&t.next);
            let next_label = *label.entry(idx).or_insert_with(|| {
                order.push(idx);
                order.len() - 1
            });
            match row.iter_mut().find(|(j, _)| *j == next_label) {
                Some(e) => e.1 += p,
                None => row.push((next_label, p)),
            }
        }
        rows.push(row);
        costs.push(cost);
        i += 1;
    }
    let mu = stationary(&SparseChain::new(rows)?, 1e-12)?;
    Ok(mu.iter().zip(&costs).map(|(m, c)| m * c).sum())
}

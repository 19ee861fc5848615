//! Classic lost-sales ordering rules and brute-force tuning of their
//! parameters.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::DemandModel;
use crate::env::SingleItemState;
use crate::error::{Error, Result};
use crate::eval::{evaluate_policy, EvalProtocol, EvalResult, Policy};
use crate::params::ItemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeuristicKind {
    ConstantOrder,
    Bracket,
    BaseStock,
    CappedBaseStock,
    Myopic1,
    Myopic2,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 6] = [
        HeuristicKind::ConstantOrder,
        HeuristicKind::Bracket,
        HeuristicKind::BaseStock,
        HeuristicKind::CappedBaseStock,
        HeuristicKind::Myopic1,
        HeuristicKind::Myopic2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HeuristicKind::ConstantOrder => "constant-order",
            HeuristicKind::Bracket => "bracket",
            HeuristicKind::BaseStock => "base-stock",
            HeuristicKind::CappedBaseStock => "capped-base-stock",
            HeuristicKind::Myopic1 => "myopic-1",
            HeuristicKind::Myopic2 => "myopic-2",
        }
    }
}

impl std::str::FromStr for HeuristicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HeuristicKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy '{s}'")))
    }
}

/// Tunable parameters; each rule reads only the ones it needs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HeuristicParams {
    /// Order rate (real-valued only for the bracket rule).
    pub r_h: f64,
    /// Order-up-to level for the inventory position.
    pub s_h: u32,
    /// Phase of the bracket rule, in `[0, 1)`.
    pub theta_h: f64,
}

impl HeuristicParams {
    fn lex_key(&self) -> (f64, u32, f64) {
        (self.r_h, self.s_h, self.theta_h)
    }
}

pub fn constant_order(hp: &HeuristicParams, params: &ItemParams) -> u32 {
    clamp_order(hp.r_h.round(), params)
}

/// `floor((t+1)·r + θ) − ceil(t·r + θ)`: an integer stream averaging `r`.
pub fn bracket(t: usize, hp: &HeuristicParams, params: &ItemParams) -> u32 {
    let t = t as f64;
    let a = ((t + 1.0) * hp.r_h + hp.theta_h).floor() - (t * hp.r_h + hp.theta_h).ceil();
    clamp_order(a, params)
}

/// Orders up to `S` in inventory position.
pub fn base_stock(state: &SingleItemState, hp: &HeuristicParams, params: &ItemParams) -> u32 {
    (hp.s_h.saturating_sub(state.inventory_position())).min(params.a_max)
}

/// Base-stock order capped at `r`.
pub fn capped_base_stock(
    state: &SingleItemState,
    hp: &HeuristicParams,
    params: &ItemParams,
) -> u32 {
    base_stock(state, hp, params).min(clamp_order(hp.r_h.round(), params))
}

fn clamp_order(a: f64, params: &ItemParams) -> u32 {
    a.clamp(0.0, params.a_max as f64) as u32
}

/// Distribution of on-hand stock just before the current order arrives,
/// i.e. after `L` periods of demand with the pipeline received in between.
fn pre_arrival_pmf(state: &SingleItemState, params: &ItemParams, demand: &[f64]) -> Vec<f64> {
    let n = params.y_max as usize + 1;
    let mut pmf = vec![0.0; n];
    pmf[state.y as usize] = 1.0;
    // periods t .. t+L-1: demand, then receipt of the next pipeline slot
    for (k, slot) in std::iter::once(None)
        .chain(state.pipeline.iter().map(Some))
        .enumerate()
    {
        if k > 0 {
            pmf = shift_clamped(&pmf, *slot.unwrap(), params.y_max);
        }
        pmf = after_demand(&pmf, demand);
    }
    pmf
}

/// pmf of `[y − d]^+`.
fn after_demand(pmf: &[f64], demand: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; pmf.len()];
    for (y, &py) in pmf.iter().enumerate() {
        if py == 0.0 {
            continue;
        }
        for (d, &pd) in demand.iter().enumerate() {
            out[y.saturating_sub(d)] += py * pd;
        }
    }
    out
}

/// pmf of `min(y + a, y_max)`.
fn shift_clamped(pmf: &[f64], a: u32, y_max: u32) -> Vec<f64> {
    let mut out = vec![0.0; pmf.len()];
    for (y, &py) in pmf.iter().enumerate() {
        out[(y + a as usize).min(y_max as usize)] += py;
    }
    out
}

/// Expected one-period holding plus penalty cost at each on-hand level.
fn period_costs(params: &ItemParams, demand: &[f64]) -> Vec<f64> {
    (0..=params.y_max)
        .map(|y| {
            demand
                .iter()
                .enumerate()
                .map(|(d, &pd)| pd * params.period_cost(y, 0, d as u32))
                .sum()
        })
        .collect()
}

/// Myopic rules with exact demand propagation.
///
/// Horizon 1 orders the least amount whose arrival keeps the stockout
/// probability at `t+L` within `(c+h)/(p+h)`. Horizon 2 minimises the
/// expected cost at `t+L` plus the discounted best expected cost at
/// `t+L+1` over a second order fixed now.
#[derive(Debug, Clone)]
pub struct MyopicPolicy {
    params: ItemParams,
    horizon: u8,
    demand: Vec<f64>,
    tail: Vec<f64>,
    costs: Vec<f64>,
    cache: HashMap<SingleItemState, u32>,
}

impl MyopicPolicy {
    pub fn new(params: &ItemParams, demand: &DemandModel, horizon: u8) -> Result<Self> {
        if !(1..=2).contains(&horizon) {
            return Err(Error::Config(format!(
                "myopic horizon must be 1 or 2, got {horizon}"
            )));
        }
        let pmf = demand.pmf().to_vec();
        let total: f64 = pmf.iter().sum();
        if pmf.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(
                "demand pmf must be a probability vector".into(),
            ));
        }
        // tail[y] = P(d > y)
        let tail = (0..=params.y_max as usize)
            .map(|y| pmf.iter().skip(y + 1).sum())
            .collect();
        Ok(Self {
            costs: period_costs(params, &pmf),
            params: params.clone(),
            horizon,
            demand: pmf,
            tail,
            cache: HashMap::new(),
        })
    }

    pub fn decide(&mut self, state: &SingleItemState) -> u32 {
        if let Some(&a) = self.cache.get(state) {
            return a;
        }
        let a = match self.horizon {
            1 => self.one_period(state),
            _ => self.two_period(state),
        };
        self.cache.insert(state.clone(), a);
        a
    }

    fn one_period(&self, state: &SingleItemState) -> u32 {
        let p = &self.params;
        let ratio = (p.c + p.h) / (p.p + p.h);
        let z = pre_arrival_pmf(state, p, &self.demand);
        for a in 0..=p.a_max {
            let stockout: f64 = z
                .iter()
                .enumerate()
                .map(|(y, &pz)| pz * self.tail[(y + a as usize).min(p.y_max as usize)])
                .sum();
            if stockout <= ratio + 1e-12 {
                return a;
            }
        }
        p.a_max
    }

    fn two_period(&self, state: &SingleItemState) -> u32 {
        let p = &self.params;
        let z = pre_arrival_pmf(state, p, &self.demand);
        let mut best = (f64::INFINITY, 0);
        for a in 0..=p.a_max {
            let arrived = shift_clamped(&z, a, p.y_max);
            let first: f64 = p.c * a as f64
                + arrived
                    .iter()
                    .zip(&self.costs)
                    .map(|(q, c)| q * c)
                    .sum::<f64>();
            let left = after_demand(&arrived, &self.demand);
            let second = (0..=p.a_max)
                .map(|a2| {
                    let next = shift_clamped(&left, a2, p.y_max);
                    p.c * a2 as f64
                        + next
                            .iter()
                            .zip(&self.costs)
                            .map(|(q, c)| q * c)
                            .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            let total = first + p.gamma * second;
            if total < best.0 - 1e-12 {
                best = (total, a);
            }
        }
        best.1
    }
}

/// Any of the six rules with fixed parameters.
#[derive(Debug, Clone)]
pub enum HeuristicPolicy {
    Simple {
        kind: HeuristicKind,
        hp: HeuristicParams,
        params: ItemParams,
    },
    Myopic(MyopicPolicy),
}

impl HeuristicPolicy {
    pub fn new(
        kind: HeuristicKind,
        hp: HeuristicParams,
        params: &ItemParams,
        demand: &DemandModel,
    ) -> Result<Self> {
        Ok(match kind {
            HeuristicKind::Myopic1 => {
                HeuristicPolicy::Myopic(MyopicPolicy::new(params, demand, 1)?)
            }
            HeuristicKind::Myopic2 => {
                HeuristicPolicy::Myopic(MyopicPolicy::new(params, demand, 2)?)
            }
            kind => HeuristicPolicy::Simple {
                kind,
                hp,
                params: params.clone(),
            },
        })
    }
}

impl Policy for HeuristicPolicy {
    fn act(&mut self, t: usize, state: &SingleItemState) -> u32 {
        match self {
            HeuristicPolicy::Myopic(m) => m.decide(state),
            HeuristicPolicy::Simple { kind, hp, params } => match kind {
                HeuristicKind::ConstantOrder => constant_order(hp, params),
                HeuristicKind::Bracket => bracket(t, hp, params),
                HeuristicKind::BaseStock => base_stock(state, hp, params),
                HeuristicKind::CappedBaseStock => capped_base_stock(state, hp, params),
                HeuristicKind::Myopic1 | HeuristicKind::Myopic2 => {
                    unreachable!("handled by the myopic variant")
                }
            },
        }
    }
}

/// Candidate parameter values; the search runs over their product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub r_h: Vec<f64>,
    pub s_h: Vec<u32>,
    pub theta_h: Vec<f64>,
}

fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

impl Grid {
    /// Default search space for `kind`.
    pub fn default_for(kind: HeuristicKind, params: &ItemParams) -> Self {
        let rates: Vec<f64> = (0..=params.a_max).map(f64::from).collect();
        let max_position = params.max_inventory_position();
        match kind {
            HeuristicKind::ConstantOrder => Grid {
                r_h: rates,
                s_h: vec![0],
                theta_h: vec![0.0],
            },
            HeuristicKind::Bracket => Grid {
                // fractional rates stream at r − 1, so search one unit higher
                r_h: steps(0.0, params.a_max as f64 + 1.0, 0.05),
                s_h: vec![0],
                theta_h: steps(0.0, 0.95, 0.05),
            },
            HeuristicKind::BaseStock => Grid {
                r_h: vec![params.a_max as f64],
                s_h: (0..=max_position).collect(),
                theta_h: vec![0.0],
            },
            HeuristicKind::CappedBaseStock => Grid {
                r_h: rates,
                s_h: (0..=40.min(max_position)).collect(),
                theta_h: vec![0.0],
            },
            HeuristicKind::Myopic1 | HeuristicKind::Myopic2 => Grid {
                r_h: vec![0.0],
                s_h: vec![0],
                theta_h: vec![0.0],
            },
        }
    }

    /// All points in lexicographic `(r, S, θ)` order.
    pub fn points(&self) -> Vec<HeuristicParams> {
        let mut pts: Vec<HeuristicParams> = self
            .r_h
            .iter()
            .flat_map(|&r_h| {
                self.s_h.iter().flat_map(move |&s_h| {
                    self.theta_h
                        .iter()
                        .map(move |&theta_h| HeuristicParams { r_h, s_h, theta_h })
                })
            })
            .collect();
        pts.sort_by(|a, b| {
            a.lex_key()
                .partial_cmp(&b.lex_key())
                .expect("finite grid values")
        });
        pts
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub kind: HeuristicKind,
    pub best: HeuristicParams,
    /// Score of the winner on the search rollouts.
    pub search: EvalResult,
    /// Score of the winner on independent rollouts, free of selection bias.
    pub holdout: Option<EvalResult>,
    pub evaluated: Vec<(HeuristicParams, f64)>,
}

/// Scores every grid point on the same demand rollouts (common random
/// numbers) and returns the cheapest, ties to the lexicographically
/// smallest parameters. The winner is optionally re-scored on `holdout`.
pub fn grid_search(
    kind: HeuristicKind,
    params: &ItemParams,
    demand: &DemandModel,
    grid: &Grid,
    protocol: &EvalProtocol,
    holdout: Option<&EvalProtocol>,
) -> Result<SearchResult> {
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::Config("empty parameter grid".into()));
    }
    let scored: Vec<(HeuristicParams, EvalResult)> = points
        .par_iter()
        .map(|hp| {
            let mut policy = HeuristicPolicy::new(kind, *hp, params, demand)?;
            Ok((*hp, evaluate_policy(&mut policy, params, demand, protocol)?))
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, (_, r)) in scored.iter().enumerate() {
        if r.mean < scored[best].1.mean {
            best = i;
        }
    }
    let (best_hp, search) = scored[best].clone();
    let holdout = holdout
        .map(|h| {
            let mut policy = HeuristicPolicy::new(kind, best_hp, params, demand)?;
            evaluate_policy(&mut policy, params, demand, h)
        })
        .transpose()?;
    Ok(SearchResult {
        kind,
        best: best_hp,
        search,
        holdout,
        evaluated: scored.into_iter().map(|(hp, r)| (hp, r.mean)).collect(),
    })
}

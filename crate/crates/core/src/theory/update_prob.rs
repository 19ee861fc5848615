//! Probability that a state-action value is updated at a step when every
//! real experience is expanded through the feedback graph.

use super::tiny::{stationary_distribution, TinyMdp};
use crate::env::seeded_rng;
use crate::error::Result;
use crate::fg::FeedbackGraphSpec;

/// Does a visit at on-hand level `y_hat` with demand `d` update a pair whose
/// on-hand level is `y`? A visit with `y_hat ≥ d` updates every pair; a
/// visit with `y_hat < d` updates pairs with `y ≤ y_hat`.
pub fn reveals_complete_rule(y: u32, y_hat: u32, d: u32) -> bool {
    y_hat >= d || (d > y && y <= y_hat)
}

/// Side-experience rule actually used for learning: a censored visit
/// (`d ≥ y_hat`) only reaches pairs with `y ≤ y_hat`; pairs must also agree
/// on every pipeline slot the graph does not enumerate.
fn reveals_generated_rule(
    y: u32,
    pipe: &[u32],
    y_hat: u32,
    pipe_hat: &[u32],
    d: u32,
    y_max: u32,
    k: usize,
) -> bool {
    let bound = if d >= y_hat { y_hat } else { y_max };
    y <= bound && pipe[k.min(pipe.len())..] == pipe_hat[k.min(pipe_hat.len())..]
}

/// `μ̃(s,a) = Σ_d P(d)·[Σ_{ŷ≥d} μ + 1{d>y}·Σ_{y≤ŷ<d} μ]`, where the inner
/// sums run over visited pairs by their on-hand level `ŷ`.
pub fn update_probability_fg(mdp: &TinyMdp, mu: &[f64]) -> Vec<f64> {
    let y_max = mdp.params.y_max as usize;
    // suffix[k] = Σ_{ŷ ≥ k} μ
    let mut by_level = vec![0.0; y_max + 2];
    for (i, &m) in mu.iter().enumerate() {
        by_level[mdp.pair(i).0.y as usize] += m;
    }
    let mut suffix = vec![0.0; y_max + 2];
    for k in (0..=y_max).rev() {
        suffix[k] = suffix[k + 1] + by_level[k];
    }
    (0..mdp.num_pairs())
        .map(|i| {
            let y = mdp.pair(i).0.y as usize;
            mdp.demand
                .support()
                .map(|(d, pd)| {
                    let d = d as usize;
                    let censored_part = if d > y { suffix[y] - suffix[d] } else { 0.0 };
                    pd * (suffix[d] + censored_part)
                })
                .sum()
        })
        .collect()
}

/// Update probability under the side experiences the learner generates.
pub fn update_probability_generated(
    mdp: &TinyMdp,
    mu: &[f64],
    spec: &FeedbackGraphSpec,
) -> Vec<f64> {
    let pairs: Vec<_> = (0..mdp.num_pairs()).map(|i| mdp.pair(i).0).collect();
    let k = spec.enumerate_pipeline_dims;
    (0..mdp.num_pairs())
        .map(|i| {
            let s = &pairs[i];
            let mut total = 0.0;
            for (j, &m) in mu.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let v = &pairs[j];
                for (d, pd) in mdp.demand.support() {
                    if reveals_generated_rule(
                        s.y,
                        &s.pipeline,
                        v.y,
                        &v.pipeline,
                        d,
                        mdp.params.y_max,
                        k,
                    ) {
                        total += m * pd;
                    }
                }
            }
            total
        })
        .collect()
}

/// Empirical visit and update frequencies from one long behaviour trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloFrequencies {
    pub steps: usize,
    pub visits: Vec<f64>,
    pub updates_complete_rule: Vec<f64>,
    pub updates_generated_rule: Vec<f64>,
}

/// Simulates the behaviour policy for `steps` periods after a burn-in and
/// counts, per pair, how often it is visited and how often each rule
/// updates it.
pub fn monte_carlo_frequencies(
    mdp: &TinyMdp,
    spec: &FeedbackGraphSpec,
    steps: usize,
    seed: u64,
) -> MonteCarloFrequencies {
    let mut rng = seeded_rng(seed, 0);
    let n = mdp.num_pairs();
    let na = mdp.num_actions();
    let pairs: Vec<_> = (0..n).map(|i| mdp.pair(i).0).collect();
    let mut visits = vec![0u64; n];
    let mut complete = vec![0u64; n];
    let mut generated = vec![0u64; n];
    let mut s = 0usize;
    let burn_in = 10_000;
    for t in 0..burn_in + steps {
        let a = mdp.sample_action(s, &mut rng);
        let d = mdp.demand.sample(&mut rng);
        if t >= burn_in {
            let visited = s * na + a as usize;
            visits[visited] += 1;
            let v = &pairs[visited];
            for (i, p) in pairs.iter().enumerate() {
                if reveals_complete_rule(p.y, v.y, d) {
                    complete[i] += 1;
                }
                if reveals_generated_rule(
                    p.y,
                    &p.pipeline,
                    v.y,
                    &v.pipeline,
                    d,
                    mdp.params.y_max,
                    spec.enumerate_pipeline_dims,
                ) {
                    generated[i] += 1;
                }
            }
        }
        let next = crate::env::transition(&mdp.params, &pairs[s * na], a, d).next;
        s = mdp.state_index(&next);
    }
    let f = |c: Vec<u64>| c.into_iter().map(|x| x as f64 / steps as f64).collect();
    MonteCarloFrequencies {
        steps,
        visits: f(visits),
        updates_complete_rule: f(complete),
        updates_generated_rule: f(generated),
    }
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `num/den` with `x/0 = ∞` for `x > 0` and `0/0` undefined (NaN).
fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        f64::NAN
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateProbabilityReport {
    pub mu: Vec<f64>,
    pub mu_tilde: Vec<f64>,
    /// Update probability under the generated side experiences.
    pub mu_tilde_generated: Vec<f64>,
    pub mu_min: f64,
    pub mu_tilde_min: f64,
    pub improvement_factor: f64,
    /// Pairs with `μ̃ < μ` (beyond rounding).
    pub violations: usize,
    pub mc: MonteCarloFrequencies,
    pub mc_error_mu: f64,
    pub mc_error_mu_tilde: f64,
    pub mc_error_generated: f64,
    /// Largest gap between the two update rules.
    pub rule_gap: f64,
}

pub fn verify_update_probability(
    mdp: &TinyMdp,
    mc_steps: usize,
    seed: u64,
) -> Result<UpdateProbabilityReport> {
    let spec = FeedbackGraphSpec::default();
    let mu = stationary_distribution(mdp)?;
    let mu_tilde = update_probability_fg(mdp, &mu);
    let mu_tilde_generated = update_probability_generated(mdp, &mu, &spec);
    let mc = monte_carlo_frequencies(mdp, &spec, mc_steps, seed);
    let mu_min = min_of(&mu);
    let mu_tilde_min = min_of(&mu_tilde);
    Ok(UpdateProbabilityReport {
        violations: mu
            .iter()
            .zip(&mu_tilde)
            .filter(|(m, t)| **t < **m - 1e-12)
            .count(),
        mc_error_mu: linf(&mu, &mc.visits),
        mc_error_mu_tilde: linf(&mu_tilde, &mc.updates_complete_rule),
        mc_error_generated: linf(&mu_tilde_generated, &mc.updates_generated_rule),
        rule_gap: linf(&mu_tilde, &mu_tilde_generated),
        improvement_factor: ratio(mu_tilde_min, mu_min),
        mu_min,
        mu_tilde_min,
        mu,
        mu_tilde,
        mu_tilde_generated,
        mc,
    })
}

/// Improvement of the smallest update probability under constant demand.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorCheck {
    pub demand: u32,
    pub mu_min: f64,
    pub mu_tilde_min: f64,
    pub factor: f64,
    /// `(y_max − d)·(a_max+1)^L`.
    pub bound: f64,
    pub holds: bool,
}

/// Computes `μ̃_min/μ_min` for `mdp` with demand fixed at `d`.
pub fn verify_single_demand_factor(mdp: &TinyMdp, d: u32) -> Result<FactorCheck> {
    let m = mdp.with_constant_demand(d)?;
    let mu = stationary_distribution(&m)?;
    let mu_tilde = update_probability_fg(&m, &mu);
    let (mu_min, mu_tilde_min) = (min_of(&mu), min_of(&mu_tilde));
    let factor = ratio(mu_tilde_min, mu_min);
    let p = &mdp.params;
    let bound =
        (p.y_max.saturating_sub(d)) as f64 * (p.num_actions() as f64).powi(p.lead_time as i32);
    Ok(FactorCheck {
        demand: d,
        mu_min,
        mu_tilde_min,
        factor,
        bound,
        holds: factor >= bound,
    })
}

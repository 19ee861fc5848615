use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::demand::DemandModel;
use crate::env::{seeded_rng, Experience, SingleItemEnv, SingleItemState};
use crate::error::Result;
use crate::eval::{evaluate_policy, EvalProtocol};
use crate::params::ItemParams;

/// Stream for the learner's exploration and sampling randomness; training
/// demand uses streams `0..episodes` and evaluation its own reserved range.
const AGENT_STREAM: u64 = 1 << 41;

/// An online learner driven by [`run_training`].
pub trait Learner {
    /// Behaviour action (may explore).
    fn act(&mut self, state: &SingleItemState, rng: &mut ChaCha8Rng) -> u32;
    /// Stores `exp` and performs whatever updates the learner makes per step.
    fn learn(
        &mut self,
        exp: &Experience,
        source_id: u64,
        beta: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<()>;
    /// Greedy action used for evaluation.
    fn greedy(&mut self, state: &SingleItemState) -> u32;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSchedule {
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub eval: EvalProtocol,
    /// Record elapsed seconds in the log; off by default so logs are
    /// byte-reproducible.
    pub record_wallclock: bool,
}

impl Default for TrainingSchedule {
    fn default() -> Self {
        Self {
            episodes: 100,
            steps_per_episode: 1000,
            eval: EvalProtocol::default(),
            record_wallclock: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogRow {
    pub run_id: String,
    pub seed: u64,
    pub episode: usize,
    pub env_steps_cumulative: u64,
    pub eval_mean_cost: f64,
    pub eval_std: f64,
    pub beta_current: f64,
    pub wallclock_s: f64,
}

/// Evaluation trace of one training run, one row per episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub rows: Vec<RunLogRow>,
}

impl RunLog {
    pub fn final_cost(&self) -> Option<f64> {
        self.rows.last().map(|r| r.eval_mean_cost)
    }

    /// Environment steps consumed when evaluation cost first reached
    /// `threshold`, if ever.
    pub fn steps_to_reach(&self, threshold: f64) -> Option<u64> {
        self.rows
            .iter()
            .find(|r| r.eval_mean_cost <= threshold)
            .map(|r| r.env_steps_cumulative)
    }
}

/// Trains `learner` for the scheduled episodes and evaluates its greedy
/// policy after each one. `beta_at(episode)` gives the intrinsic weight.
///
/// Training episode `e` restarts the system empty with demand stream `e` of
/// `seed`; evaluation reuses the same seed-derived streams every episode, so
/// two learners run with the same seed see identical demand.
pub fn run_training<L: Learner + ?Sized>(
    params: &ItemParams,
    demand: &DemandModel,
    learner: &mut L,
    schedule: &TrainingSchedule,
    beta_at: impl Fn(usize) -> f64,
    seed: u64,
    run_id: &str,
) -> Result<RunLog> {
    let start = Instant::now();
    let mut env = SingleItemEnv::with_demand_stream(params.clone(), demand.clone(), seed, 0)?;
    let mut rng = seeded_rng(seed, AGENT_STREAM);
    let eval = EvalProtocol {
        seed,
        ..schedule.eval
    };
    let mut log = RunLog::default();
    let mut steps = 0u64;
    for episode in 0..schedule.episodes {
        let beta = beta_at(episode);
        env.reset_stream(seed, episode as u64);
        for _ in 0..schedule.steps_per_episode {
            let state = env.state().clone();
            let a = learner.act(&state, &mut rng);
            let exp = env.step(a)?;
            learner.learn(&exp, steps, beta, &mut rng)?;
            steps += 1;
        }
        let result = evaluate_policy(
            &mut |_: usize, s: &SingleItemState| learner.greedy(s),
            params,
            demand,
            &eval,
        )?;
        log.rows.push(RunLogRow {
            run_id: run_id.to_string(),
            seed,
            episode: episode + 1,
            env_steps_cumulative: steps,
            eval_mean_cost: result.mean,
            eval_std: result.std,
            beta_current: beta,
            wallclock_s: if schedule.record_wallclock {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            },
        });
    }
    Ok(log)
}

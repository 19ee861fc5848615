//! Experiment configuration and multi-seed orchestration.
//!
//! An experiment file is the environment TOML (see [`EnvConfig`]) plus four
//! optional sections, each key defaulting when omitted:
//!
//! ```toml
//! [agent]        # AgentConfig: kind = "dqn", epsilon, lr, alpha, use_fg, ...
//! [fg]           # FeedbackGraphSpec: enumerate_pipeline_dims, cap_side_per_experience
//! [intrinsic]    # IntrinsicRewardConfig: beta0, beta_decay, heads
//! [run]          # RunSettings: seeds, episodes, steps_per_episode, eval_*, ...
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use super::csvio::{summarize, write_run_log, write_summary, SummaryRow};
use crate::agents::{
    run_training, AgentConfig, AgentKind, DqnAgent, Learner, RunLog, TabularAgent, TrainingSchedule,
};
use crate::curiosity::IntrinsicRewardConfig;
use crate::demand::DemandModel;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::eval::EvalProtocol;
use crate::fg::FeedbackGraphSpec;
use crate::params::ItemParams;

/// The `[run]` section: which seeds to train and how long.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    /// Label written to every log row; derived from the agent when unset.
    pub run_id: Option<String>,
    pub seeds: Vec<u64>,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub eval_episodes: usize,
    pub eval_steps: usize,
    pub eval_warmup: usize,
    pub record_wallclock: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        let schedule = TrainingSchedule::default();
        Self {
            run_id: None,
            seeds: (0..20).collect(),
            episodes: schedule.episodes,
            steps_per_episode: schedule.steps_per_episode,
            eval_episodes: schedule.eval.episodes,
            eval_steps: schedule.eval.steps,
            eval_warmup: schedule.eval.warmup,
            record_wallclock: schedule.record_wallclock,
        }
    }
}

impl RunSettings {
    pub fn schedule(&self) -> TrainingSchedule {
        TrainingSchedule {
            episodes: self.episodes,
            steps_per_episode: self.steps_per_episode,
            eval: EvalProtocol {
                episodes: self.eval_episodes,
                steps: self.eval_steps,
                warmup: self.eval_warmup,
                seed: 0,
            },
            record_wallclock: self.record_wallclock,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub fg: FeedbackGraphSpec,
    pub intrinsic: IntrinsicRewardConfig,
    pub run: RunSettings,
}

fn section<T: Default + for<'de> Deserialize<'de>>(table: &Table, name: &str) -> Result<T> {
    match table.get(name) {
        None => Ok(T::default()),
        Some(v @ Value::Table(_)) => {
            T::deserialize(v.clone()).map_err(|e| Error::Config(format!("[{name}]: {e}")))
        }
        Some(_) => Err(Error::Config(format!("`{name}` must be a table"))),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::parse(path, msg),
            other => other,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        Ok(Self {
            env: EnvConfig::from_table(&table)?,
            agent: section(&table, "agent")?,
            fg: section(&table, "fg")?,
            intrinsic: section(&table, "intrinsic")?,
            run: section(&table, "run")?,
        })
    }

    /// The single-item environment the learners train on.
    pub fn params(&self) -> Result<&ItemParams> {
        self.env.single()
    }

    pub fn validate(&self) -> Result<()> {
        let params = self.params()?;
        params.validate()?;
        self.agent.validate()?;
        self.fg.validate(params)?;
        self.intrinsic.validate()?;
        if self.agent.use_intrinsic && self.agent.kind != AgentKind::Dqn {
            return Err(Error::Config(
                "the intrinsic reward needs the dqn agent".into(),
            ));
        }
        if self.run.seeds.is_empty() {
            return Err(Error::Config("no seeds to run".into()));
        }
        let distinct: HashSet<u64> = self.run.seeds.iter().copied().collect();
        if distinct.len() != self.run.seeds.len() {
            return Err(Error::Config("seed list contains duplicates".into()));
        }
        if self.run.episodes == 0 || self.run.steps_per_episode == 0 {
            return Err(Error::Config(
                "episodes and steps_per_episode must be positive".into(),
            ));
        }
        if self.run.eval_episodes == 0 || self.run.eval_steps == 0 {
            return Err(Error::Config(
                "eval_episodes and eval_steps must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Label for the log rows, e.g. `dqn-fg-inr` or `qtable-plain`.
    pub fn run_id(&self) -> String {
        if let Some(id) = &self.run.run_id {
            return id.clone();
        }
        let kind = match self.agent.kind {
            AgentKind::Qtable => "qtable",
            AgentKind::Dqn => "dqn",
        };
        let mut id = kind.to_string();
        match (self.agent.use_fg, self.agent.use_intrinsic) {
            (false, false) => id.push_str("-plain"),
            (fg, inr) => {
                if fg {
                    id.push_str("-fg");
                }
                if inr {
                    id.push_str("-inr");
                }
            }
        }
        id
    }

    /// Intrinsic weight for a 0-based training episode.
    pub fn beta_at(&self, episode: usize) -> f64 {
        if self.agent.use_intrinsic {
            self.intrinsic.beta_at(episode)
        } else {
            0.0
        }
    }

    pub fn build_learner(&self, seed: u64) -> Result<Box<dyn Learner + Send>> {
        let params = self.params()?;
        Ok(match self.agent.kind {
            AgentKind::Qtable => Box::new(TabularAgent::new(params, self.agent, self.fg)?),
            AgentKind::Dqn => Box::new(DqnAgent::new(
                params,
                self.agent,
                self.fg,
                self.intrinsic.heads,
                seed,
            )?),
        })
    }
}

/// Trains and evaluates one seed. The result depends only on the config
/// and the seed.
pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<RunLog> {
    config.validate()?;
    let params = config.params()?;
    let demand = DemandModel::poisson_clamped(params.d_mean, params.d_max)?;
    let mut learner = config.build_learner(seed)?;
    run_training(
        params,
        &demand,
        learner.as_mut(),
        &config.run.schedule(),
        |e| config.beta_at(e),
        seed,
        &config.run_id(),
    )
}

/// File name of the log for `seed` inside an experiment directory.
pub fn run_log_file_name(seed: u64) -> String {
    format!("runlog_seed{seed}.csv")
}

pub const SUMMARY_FILE_NAME: &str = "summary.csv";

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// Logs in the order of the configured seed list.
    pub logs: Vec<RunLog>,
    pub summary: Vec<SummaryRow>,
    pub run_log_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
}

/// Runs every configured seed on a pool of at most `workers` threads and
/// writes one run log per seed plus `summary.csv` into `out_dir`.
///
/// Seeds are independent, so the per-seed logs and the summary are the same
/// for any worker count and any ordering of the seed list.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
    workers: usize,
) -> Result<ExperimentOutput> {
    config.validate()?;
    if workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let logs: Vec<RunLog> = pool.install(|| {
        config
            .run
            .seeds
            .par_iter()
            .map(|&seed| {
                log::info!("seed {seed}: training {}", config.run_id());
                run_seed(config, seed)
            })
            .collect::<Result<_>>()
    })?;
    let mut run_log_paths = Vec::with_capacity(logs.len());
    for (seed, log) in config.run.seeds.iter().zip(&logs) {
        let path = out_dir.join(run_log_file_name(*seed));
        write_run_log(&path, log)?;
        run_log_paths.push(path);
    }
    let summary = summarize(&logs)?;
    let summary_path = out_dir.join(SUMMARY_FILE_NAME);
    write_summary(&summary_path, &summary)?;
    Ok(ExperimentOutput {
        logs,
        summary,
        run_log_paths,
        summary_path,
    })
}

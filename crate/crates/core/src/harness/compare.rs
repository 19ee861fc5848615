//! Side-by-side readout of two experiment summaries.

use std::fmt;
use std::path::Path;

use super::csvio::{format_real, SummaryRow};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeDiff {
    pub episode: usize,
    pub env_steps_cumulative: u64,
    pub mean_a: f64,
    pub mean_b: f64,
    /// `mean_b − mean_a`; negative when run B is cheaper.
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub episodes: Vec<EpisodeDiff>,
    /// Final-episode `mean_b − mean_a`.
    pub final_gap: f64,
    pub threshold: Option<f64>,
    /// First episode whose mean cost is at or below the threshold.
    pub first_crossing_a: Option<usize>,
    pub first_crossing_b: Option<usize>,
}

fn first_crossing(rows: &[SummaryRow], threshold: Option<f64>) -> Option<usize> {
    let t = threshold?;
    rows.iter()
        .find(|r| r.mean_eval_cost <= t)
        .map(|r| r.episode)
}

/// Compares two summaries on the same episode grid. `threshold` is a target
/// cost (for example 110% of the optimal cost) whose first crossing is
/// reported for each run.
pub fn compare_runs(
    a: &[SummaryRow],
    b: &[SummaryRow],
    threshold: Option<f64>,
) -> Result<Comparison> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Comparison("a summary has no rows".into()));
    }
    if a.len() != b.len() {
        return Err(Error::Comparison(format!(
            "episode counts differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut episodes = Vec::with_capacity(a.len());
    for (ra, rb) in a.iter().zip(b) {
        if ra.episode != rb.episode || ra.env_steps_cumulative != rb.env_steps_cumulative {
            return Err(Error::Comparison(format!(
                "episode grids differ at episode {} (steps {}) vs {} (steps {})",
                ra.episode, ra.env_steps_cumulative, rb.episode, rb.env_steps_cumulative
            )));
        }
        episodes.push(EpisodeDiff {
            episode: ra.episode,
            env_steps_cumulative: ra.env_steps_cumulative,
            mean_a: ra.mean_eval_cost,
            mean_b: rb.mean_eval_cost,
            diff: rb.mean_eval_cost - ra.mean_eval_cost,
        });
    }
    Ok(Comparison {
        final_gap: episodes.last().map_or(0.0, |e| e.diff),
        episodes,
        threshold,
        first_crossing_a: first_crossing(a, threshold),
        first_crossing_b: first_crossing(b, threshold),
    })
}

fn crossing_text(c: Option<usize>) -> String {
    c.map_or_else(|| "not reached".to_string(), |e| e.to_string())
}

impl Comparison {
    /// Writes the per-episode table
    /// `episode, env_steps_cumulative, mean_a, mean_b, diff`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("episode,env_steps_cumulative,mean_a,mean_b,diff\n");
        for e in &self.episodes {
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                e.episode,
                e.env_steps_cumulative,
                format_real(e.mean_a),
                format_real(e.mean_b),
                format_real(e.diff)
            ));
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

impl fmt::Display for Comparison {
    /// One `key=value` line, e.g.
    /// `final_gap=-1.2e-1 threshold=3.0e0 crossing_a=not reached crossing_b=12`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "episodes={} final_gap={}",
            self.episodes.len(),
            format_real(self.final_gap)
        )?;
        if let Some(t) = self.threshold {
            write!(
                f,
                " threshold={} crossing_a={} crossing_b={}",
                format_real(t),
                crossing_text(self.first_crossing_a),
                crossing_text(self.first_crossing_b)
            )?;
        }
        Ok(())
    }
}

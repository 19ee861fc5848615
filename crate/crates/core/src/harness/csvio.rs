//! CSV persistence for run logs and seed summaries.
//!
//! Files are UTF-8 with LF line endings and a header row. Integers are
//! written in decimal; reals in scientific notation with 17 significant
//! digits (`{:.16e}`, `.` as the decimal point), which parses back to the
//! identical `f64`.
//!
//! Run log columns: `run_id, seed, episode, env_steps_cumulative,
//! eval_mean_cost, eval_std, beta_current, wallclock_s`.
//!
//! Summary columns: `episode, env_steps_cumulative, seeds, mean_eval_cost,
//! std_eval_cost, beta_current` — per-episode mean and sample standard
//! deviation of `eval_mean_cost` across seeds.

use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Terminator, WriterBuilder};

use crate::agents::{RunLog, RunLogRow};
use crate::error::{Error, Result};

pub const RUN_LOG_COLUMNS: [&str; 8] = [
    "run_id",
    "seed",
    "episode",
    "env_steps_cumulative",
    "eval_mean_cost",
    "eval_std",
    "beta_current",
    "wallclock_s",
];

pub const SUMMARY_COLUMNS: [&str; 6] = [
    "episode",
    "env_steps_cumulative",
    "seeds",
    "mean_eval_cost",
    "std_eval_cost",
    "beta_current",
];

/// One episode of a multi-seed experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub episode: usize,
    pub env_steps_cumulative: u64,
    pub seeds: usize,
    pub mean_eval_cost: f64,
    pub std_eval_cost: f64,
    pub beta_current: f64,
}

/// Fixed-width scientific formatting with 17 significant digits.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Aggregates per-seed logs into one row per episode. Logs are combined in
/// ascending seed order so the result does not depend on the order in which
/// seeds were listed or finished.
pub fn summarize(logs: &[RunLog]) -> Result<Vec<SummaryRow>> {
    let mut sorted: Vec<&RunLog> = logs.iter().collect();
    sorted.sort_by_key(|l| l.rows.first().map(|r| r.seed));
    let Some(first) = sorted.first() else {
        return Ok(Vec::new());
    };
    for log in &sorted[1..] {
        let same_grid = log.rows.len() == first.rows.len()
            && log.rows.iter().zip(&first.rows).all(|(a, b)| {
                a.episode == b.episode && a.env_steps_cumulative == b.env_steps_cumulative
            });
        if !same_grid {
            return Err(Error::Comparison(
                "run logs disagree on the episode grid".into(),
            ));
        }
    }
    let n = sorted.len();
    Ok((0..first.rows.len())
        .map(|i| {
            let costs: Vec<f64> = sorted.iter().map(|l| l.rows[i].eval_mean_cost).collect();
            let mean = costs.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            let row = &first.rows[i];
            SummaryRow {
                episode: row.episode,
                env_steps_cumulative: row.env_steps_cumulative,
                seeds: n,
                mean_eval_cost: mean,
                std_eval_cost: std,
                beta_current: row.beta_current,
            }
        })
        .collect())
}

fn write_records(
    path: &Path,
    header: &[&str],
    records: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = WriterBuilder::new()
        .terminator(Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for rec in records {
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::parse(path, format!("{other:?}")),
        }
    } else {
        Error::parse(path, e)
    }
}

pub fn write_run_log(path: &Path, log: &RunLog) -> Result<()> {
    write_records(
        path,
        &RUN_LOG_COLUMNS,
        log.rows.iter().map(|r| {
            vec![
                r.run_id.clone(),
                r.seed.to_string(),
                r.episode.to_string(),
                r.env_steps_cumulative.to_string(),
                format_real(r.eval_mean_cost),
                format_real(r.eval_std),
                format_real(r.beta_current),
                format_real(r.wallclock_s),
            ]
        }),
    )
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_records(
        path,
        &SUMMARY_COLUMNS,
        rows.iter().map(|r| {
            vec![
                r.episode.to_string(),
                r.env_steps_cumulative.to_string(),
                r.seeds.to_string(),
                format_real(r.mean_eval_cost),
                format_real(r.std_eval_cost),
                format_real(r.beta_current),
            ]
        }),
    )
}

/// Reads all records after checking the header matches `columns` exactly.
fn read_records(path: &Path, columns: &[&str]) -> Result<Vec<StringRecord>> {
    let mut r = ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    for (i, want) in columns.iter().enumerate() {
        match header.get(i) {
            Some(got) if got == *want => {}
            Some(got) => {
                return Err(Error::parse(
                    path,
                    format!("column {} is `{got}`, expected `{want}`", i + 1),
                ))
            }
            None => return Err(Error::parse(path, format!("missing column `{want}`"))),
        }
    }
    if header.len() != columns.len() {
        return Err(Error::parse(
            path,
            format!("expected {} columns, found {}", columns.len(), header.len()),
        ));
    }
    r.records()
        .map(|rec| rec.map_err(|e| csv_error(path, e)))
        .collect()
}

fn field<T: std::str::FromStr>(
    path: &Path,
    rec: &StringRecord,
    columns: &[&str],
    i: usize,
) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|_| {
        let line = rec.position().map_or(0, |p| p.line());
        Error::parse(
            path,
            format!(
                "line {line}: column `{}` has invalid value `{raw}`",
                columns[i]
            ),
        )
    })
}

pub fn read_run_log(path: &Path) -> Result<RunLog> {
    let cols = &RUN_LOG_COLUMNS;
    let rows = read_records(path, cols)?
        .iter()
        .map(|rec| {
            Ok(RunLogRow {
                run_id: field(path, rec, cols, 0)?,
                seed: field(path, rec, cols, 1)?,
                episode: field(path, rec, cols, 2)?,
                env_steps_cumulative: field(path, rec, cols, 3)?,
                eval_mean_cost: field(path, rec, cols, 4)?,
                eval_std: field(path, rec, cols, 5)?,
                beta_current: field(path, rec, cols, 6)?,
                wallclock_s: field(path, rec, cols, 7)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunLog { rows })
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let cols = &SUMMARY_COLUMNS;
    read_records(path, cols)?
        .iter()
        .map(|rec| {
            Ok(SummaryRow {
                episode: field(path, rec, cols, 0)?,
                env_steps_cumulative: field(path, rec, cols, 1)?,
                seeds: field(path, rec, cols, 2)?,
                mean_eval_cost: field(path, rec, cols, 3)?,
                std_eval_cost: field(path, rec, cols, 4)?,
                beta_current: field(path, rec, cols, 5)?,
            })
        })
        .collect()
}

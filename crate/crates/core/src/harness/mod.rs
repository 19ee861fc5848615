//! Experiment configuration, seed sweeps and CSV persistence.

mod compare;
mod csvio;
mod experiment;

pub use compare::{compare_runs, Comparison, EpisodeDiff};
pub use csvio::{
    format_real, read_run_log, read_summary, summarize, write_run_log, write_summary, SummaryRow,
    RUN_LOG_COLUMNS, SUMMARY_COLUMNS,
};
pub use experiment::{
    run_experiment, run_log_file_name, run_seed, ExperimentConfig, ExperimentOutput, RunSettings,
    SUMMARY_FILE_NAME,
};

//! `lostsales` command-line interface.
//!
//! Every failure ends with one line on stderr,
//! `error kind=<kind> message=<text>`, and a nonzero exit code.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lostsales::agents::AgentKind;
use lostsales::env::{EnvConfig, StateIndexer};
use lostsales::eval::{evaluate_policy, EvalProtocol, EvalResult};
use lostsales::harness::{self, format_real, ExperimentConfig};
use lostsales::heuristics::{grid_search, Grid, HeuristicKind, HeuristicParams, HeuristicPolicy};
use lostsales::theory::{self, TabularPolicy, TinyMdp};
use lostsales::{DemandModel, Error, ItemParams};

#[derive(Parser, Debug)]
#[command(
    name = "lostsales",
    version,
    about = "Lost-sales inventory control: learners, heuristics and exact oracles"
)]
struct Cli {
    /// Experiment / environment TOML file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run a single seed (overrides the configured seed list).
    #[arg(long, global = true, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Seed list: `A..B` (half-open) or comma-separated values.
    #[arg(long, global = true)]
    seeds: Option<String>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Record elapsed seconds in run logs (makes logs non-reproducible).
    #[arg(long, global = true)]
    record_wallclock: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a learner over one or more seeds and write run logs.
    Train(TrainArgs),
    /// Score a stored tabular policy or a heuristic.
    Evaluate(EvaluateArgs),
    /// Grid-search heuristic parameters.
    HeuristicSearch(SearchArgs),
    /// Solve for the optimal policy by value iteration.
    Optimal(OptimalArgs),
    /// Exact checks on small instances.
    Theory {
        #[command(subcommand)]
        command: TheoryCommand,
    },
    /// Compare two experiment summaries.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, value_parser = parse_from_str::<AgentKind>)]
    agent: Option<AgentKind>,
    #[arg(long, value_enum)]
    fg: Option<Switch>,
    #[arg(long, value_enum)]
    intrinsic: Option<Switch>,
    /// Number of pipeline slots enumerated by the feedback graph.
    #[arg(long)]
    fg_dims: Option<usize>,
    /// Keep at most this many side experiences per step.
    #[arg(long)]
    fg_cap: Option<usize>,
    #[arg(long)]
    beta0: Option<f64>,
    #[arg(long)]
    beta_decay: Option<f64>,
    /// Ensemble heads.
    #[arg(long)]
    heads: Option<usize>,
    /// Keep the ensemble but weight the intrinsic reward by zero.
    #[arg(long)]
    no_intrinsic: bool,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct ProtocolArgs {
    /// Evaluation episodes.
    #[arg(long, default_value_t = 10)]
    episodes: usize,
    /// Scored periods per episode.
    #[arg(long, default_value_t = 400)]
    steps: usize,
    /// Discarded periods at the start of each episode.
    #[arg(long, default_value_t = 100)]
    warmup: usize,
}

impl ProtocolArgs {
    fn protocol(&self, seed: u64) -> EvalProtocol {
        EvalProtocol {
            episodes: self.episodes,
            steps: self.steps,
            warmup: self.warmup,
            seed,
        }
    }
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Policy file written by `optimal`.
    #[arg(
        long,
        conflicts_with = "heuristic",
        required_unless_present = "heuristic"
    )]
    policy_file: Option<PathBuf>,
    #[arg(long, value_parser = parse_from_str::<HeuristicKind>)]
    heuristic: Option<HeuristicKind>,
    #[arg(long, default_value_t = 0.0)]
    r: f64,
    #[arg(long = "s-level", default_value_t = 0)]
    s_level: u32,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[command(flatten)]
    protocol: ProtocolArgs,
}

#[derive(Args, Debug)]
struct SearchArgs {
    /// Heuristic name, or `all`.
    #[arg(long)]
    policy: String,
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// Episodes for re-scoring the winner on fresh demand (0 disables).
    #[arg(long, default_value_t = 100)]
    holdout_episodes: usize,
}

#[derive(Args, Debug)]
struct OptimalArgs {
    /// Sup-norm stopping tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Largest state space attempted.
    #[arg(long, default_value_t = theory::DEFAULT_STATE_BUDGET)]
    state_budget: usize,
    #[command(flatten)]
    protocol: ProtocolArgs,
}

#[derive(Subcommand, Debug)]
enum TheoryCommand {
    /// Exact vs simulated update probabilities with and without the feedback graph.
    VerifyMu {
        #[arg(long, default_value_t = 1_000_000)]
        mc_steps: usize,
    },
    /// Closed-form and brute-force graph numbers at inventory `y`.
    GraphNumbers {
        #[arg(long)]
        y: u32,
        #[arg(long)]
        censored: bool,
    },
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Summary CSV of run A.
    a: PathBuf,
    /// Summary CSV of run B.
    b: PathBuf,
    /// Target cost whose first crossing is reported.
    #[arg(long)]
    threshold: Option<f64>,
}

fn parse_from_str<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_seeds(text: &str) -> anyhow::Result<Vec<u64>> {
    let text = text.trim();
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u64 = lo
            .trim()
            .parse()
            .with_context(|| format!("bad seed range `{text}`"))?;
        let hi: u64 = hi
            .trim()
            .parse()
            .with_context(|| format!("bad seed range `{text}`"))?;
        if lo >= hi {
            bail!("empty seed range `{text}`");
        }
        return Ok((lo..hi).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse().with_context(|| format!("bad seed `{s}`")))
        .collect()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("error kind=usage message={first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = err.downcast_ref::<Error>().map_or("usage", Error::kind);
            let message = format!("{err:#}").replace(['\n', '\r'], " ");
            eprintln!("error kind={kind} message={message}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Train(args) => train(&cli, args),
        Command::Evaluate(args) => evaluate(&cli, args),
        Command::HeuristicSearch(args) => heuristic_search(&cli, args),
        Command::Optimal(args) => optimal(&cli, args),
        Command::Theory { command } => match command {
            TheoryCommand::VerifyMu { mc_steps } => verify_mu(&cli, *mc_steps),
            TheoryCommand::GraphNumbers { y, censored } => graph_numbers(&cli, *y, *censored),
        },
        Command::Compare(args) => compare(&cli, args),
    }
}

fn experiment_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.run.seeds = vec![seed];
    }
    if let Some(seeds) = &cli.seeds {
        cfg.run.seeds = parse_seeds(seeds)?;
    }
    cfg.run.record_wallclock |= cli.record_wallclock;
    Ok(cfg)
}

fn single_item(cli: &Cli) -> anyhow::Result<ItemParams> {
    let env = match &cli.config {
        Some(path) => EnvConfig::load(path)?,
        None => EnvConfig::default(),
    };
    Ok(env.single()?.clone())
}

fn demand_of(params: &ItemParams) -> anyhow::Result<DemandModel> {
    Ok(DemandModel::poisson_clamped(params.d_mean, params.d_max)?)
}

fn first_seed(cli: &Cli) -> anyhow::Result<u64> {
    match (&cli.seed, &cli.seeds) {
        (Some(s), _) => Ok(*s),
        (None, Some(list)) => parse_seeds(list)?
            .first()
            .copied()
            .ok_or_else(|| anyhow!("empty seed list")),
        (None, None) => Ok(0),
    }
}

fn workers(cli: &Cli) -> usize {
    cli.workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

fn with_workers<T: Send>(cli: &Cli, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers(cli))
        .build()?;
    Ok(pool.install(f))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.into(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    Ok(())
}

fn train(cli: &Cli, args: &TrainArgs) -> anyhow::Result<()> {
    let mut cfg = experiment_config(cli)?;
    if let Some(kind) = args.agent {
        cfg.agent.kind = kind;
    }
    if let Some(fg) = args.fg {
        cfg.agent.use_fg = fg.on();
    }
    if let Some(inr) = args.intrinsic {
        cfg.agent.use_intrinsic = inr.on();
    }
    if let Some(k) = args.fg_dims {
        cfg.fg.enumerate_pipeline_dims = k;
    }
    if let Some(cap) = args.fg_cap {
        cfg.fg.cap_side_per_experience = Some(cap);
    }
    if let Some(b) = args.beta0 {
        cfg.intrinsic.beta0 = b;
    }
    if let Some(d) = args.beta_decay {
        cfg.intrinsic.beta_decay = d;
    }
    if let Some(m) = args.heads {
        cfg.intrinsic.heads = m;
    }
    if args.no_intrinsic {
        cfg.intrinsic.beta0 = 0.0;
    }
    if let Some(e) = args.episodes {
        cfg.run.episodes = e;
    }
    if let Some(s) = args.steps {
        cfg.run.steps_per_episode = s;
    }
    cfg.validate()?;

    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(cfg.run_id()));
    if out.extension().is_some_and(|e| e == "csv") {
        // a single run log file
        let [seed] = cfg.run.seeds[..] else {
            bail!("a .csv output takes exactly one seed; pass a directory for seed sweeps");
        };
        let log = with_workers(cli, || harness::run_seed(&cfg, seed))??;
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                path: dir.into(),
                source: e,
            })?;
        }
        harness::write_run_log(&out, &log)?;
        println!(
            "run_id={} seeds=1 episodes={} final_cost={} out={}",
            cfg.run_id(),
            log.rows.len(),
            format_real(log.final_cost().unwrap_or(f64::NAN)),
            out.display()
        );
    } else {
        let result = harness::run_experiment(&cfg, &out, workers(cli))?;
        let last = result.summary.last();
        println!(
            "run_id={} seeds={} episodes={} final_mean={} final_std={} out={}",
            cfg.run_id(),
            cfg.run.seeds.len(),
            result.summary.len(),
            format_real(last.map_or(f64::NAN, |r| r.mean_eval_cost)),
            format_real(last.map_or(f64::NAN, |r| r.std_eval_cost)),
            result.summary_path.display()
        );
    }
    Ok(())
}

fn result_line(label: &str, r: &EvalResult) -> String {
    format!(
        "{label} mean={} std={} sem={}",
        format_real(r.mean),
        format_real(r.std),
        format_real(r.sem())
    )
}

fn episode_costs_csv(r: &EvalResult) -> String {
    let mut text = String::from("episode,mean_cost\n");
    for (i, c) in r.episode_costs.iter().enumerate() {
        let _ = writeln!(text, "{},{}", i + 1, format_real(*c));
    }
    text
}

fn evaluate(cli: &Cli, args: &EvaluateArgs) -> anyhow::Result<()> {
    let params = single_item(cli)?;
    let demand = demand_of(&params)?;
    let protocol = args.protocol.protocol(first_seed(cli)?);
    let (label, result) = if let Some(path) = &args.policy_file {
        let mut policy = TabularPolicy::load(path)?;
        if policy.indexer != StateIndexer::new(&params) {
            return Err(Error::Config(format!(
                "{} was solved for different y_max/a_max/L",
                path.display()
            ))
            .into());
        }
        (
            "policy=tabular".to_string(),
            evaluate_policy(&mut policy, &params, &demand, &protocol)?,
        )
    } else {
        let kind = args.heuristic.expect("clap requires a policy");
        let hp = HeuristicParams {
            r_h: args.r,
            s_h: args.s_level,
            theta_h: args.theta,
        };
        let mut policy = HeuristicPolicy::new(kind, hp, &params, &demand)?;
        (
            format!("policy={}", kind.name()),
            evaluate_policy(&mut policy, &params, &demand, &protocol)?,
        )
    };
    println!("{}", result_line(&label, &result));
    if let Some(out) = &cli.out {
        write_text(out, &episode_costs_csv(&result))?;
    }
    Ok(())
}

fn heuristic_search(cli: &Cli, args: &SearchArgs) -> anyhow::Result<()> {
    let params = single_item(cli)?;
    let demand = demand_of(&params)?;
    let seed = first_seed(cli)?;
    let kinds: Vec<HeuristicKind> = if args.policy == "all" {
        HeuristicKind::ALL.to_vec()
    } else {
        vec![args.policy.parse()?]
    };
    let protocol = args.protocol.protocol(seed);
    // the holdout draws demand from a different seed than the search
    let holdout = (args.holdout_episodes > 0).then(|| EvalProtocol {
        episodes: args.holdout_episodes,
        seed: seed.wrapping_add(12_345),
        ..protocol
    });
    let mut text = String::from(
        "policy,r_h,s_h,theta_h,search_mean,search_std,holdout_mean,holdout_std,points\n",
    );
    for kind in kinds {
        let grid = Grid::default_for(kind, &params);
        let res = with_workers(cli, || {
            grid_search(kind, &params, &demand, &grid, &protocol, holdout.as_ref())
        })??;
        let (hm, hs) = res
            .holdout
            .as_ref()
            .map_or((f64::NAN, f64::NAN), |h| (h.mean, h.std));
        println!(
            "policy={} r_h={} s_h={} theta_h={} search_mean={} holdout_mean={}",
            kind.name(),
            res.best.r_h,
            res.best.s_h,
            res.best.theta_h,
            format_real(res.search.mean),
            format_real(hm)
        );
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{}",
            kind.name(),
            format_real(res.best.r_h),
            res.best.s_h,
            format_real(res.best.theta_h),
            format_real(res.search.mean),
            format_real(res.search.std),
            format_real(hm),
            format_real(hs),
            res.evaluated.len()
        );
    }
    if let Some(out) = &cli.out {
        write_text(out, &text)?;
    }
    Ok(())
}

fn optimal(cli: &Cli, args: &OptimalArgs) -> anyhow::Result<()> {
    let params = single_item(cli)?;
    let demand = demand_of(&params)?;
    let vi = with_workers(cli, || {
        theory::value_iteration(&params, &demand, args.tol, args.state_budget)
    })??;
    let exact = theory::stationary_average_cost(&params, &demand, &vi.policy)?;
    let mut policy = vi.policy.clone();
    let sim = evaluate_policy(
        &mut policy,
        &params,
        &demand,
        &args.protocol.protocol(first_seed(cli)?),
    )?;
    println!(
        "states={} sweeps={} residual={} stationary_cost={} {}",
        vi.policy.actions.len(),
        vi.sweeps,
        format_real(vi.residuals.last().copied().unwrap_or(0.0)),
        format_real(exact),
        result_line("simulated", &sim)
    );
    if let Some(out) = &cli.out {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                path: dir.into(),
                source: e,
            })?;
        }
        vi.policy.save(out)?;
    }
    Ok(())
}

fn verify_mu(cli: &Cli, mc_steps: usize) -> anyhow::Result<()> {
    let mdp = match &cli.config {
        Some(_) => {
            let params = single_item(cli)?;
            let demand = demand_of(&params)?;
            TinyMdp::uniform(params, demand)?
        }
        None => TinyMdp::default_instance(),
    };
    let report = theory::verify_update_probability(&mdp, mc_steps, first_seed(cli)?)?;
    println!(
        "pairs={} violations={} mu_min={} mu_tilde_min={} improvement={} mc_error_mu={} mc_error_mu_tilde={} mc_error_generated={} rule_gap={}",
        report.mu.len(),
        report.violations,
        format_real(report.mu_min),
        format_real(report.mu_tilde_min),
        format_real(report.improvement_factor),
        format_real(report.mc_error_mu),
        format_real(report.mc_error_mu_tilde),
        format_real(report.mc_error_generated),
        format_real(report.rule_gap)
    );
    for d in 0..=mdp.params.d_max.min(mdp.params.y_max) {
        let f = theory::verify_single_demand_factor(&mdp, d)?;
        println!(
            "constant_demand={} factor={} bound={} holds={}",
            d,
            format_real(f.factor),
            format_real(f.bound),
            f.holds
        );
    }
    if let Some(out) = &cli.out {
        let mut text = String::from("pair,y,pipeline,action,mu,mu_tilde,mu_tilde_generated,mc_visits,mc_updates,mc_updates_generated\n");
        for i in 0..report.mu.len() {
            let (s, a) = mdp.pair(i);
            let pipeline: Vec<String> = s.pipeline.iter().map(u32::to_string).collect();
            let _ = writeln!(
                text,
                "{},{},{},{},{},{},{},{},{},{}",
                i,
                s.y,
                pipeline.join(" "),
                a,
                format_real(report.mu[i]),
                format_real(report.mu_tilde[i]),
                format_real(report.mu_tilde_generated[i]),
                format_real(report.mc.visits[i]),
                format_real(report.mc.updates_complete_rule[i]),
                format_real(report.mc.updates_generated_rule[i])
            );
        }
        write_text(out, &text)?;
    }
    Ok(())
}

fn graph_numbers(cli: &Cli, y: u32, censored: bool) -> anyhow::Result<()> {
    let params = match &cli.config {
        Some(_) => single_item(cli)?,
        None => ItemParams {
            y_max: 5,
            a_max: 1,
            lead_time: 1,
            d_max: 5,
            ..ItemParams::default()
        },
    };
    let fmt =
        |g: theory::GraphNumbers| format!("omega={} alpha={} zeta={}", g.omega, g.alpha, g.zeta);
    let printed = theory::graph_numbers(y, censored, &params)?;
    let counted = theory::graph_numbers_full_space(y, censored, &params)?;
    println!("closed_form_printed {}", fmt(printed));
    println!("closed_form_full_space {}", fmt(counted));
    match theory::feedback_graph(y, censored, &params).and_then(|g| g.brute_force_numbers()) {
        Ok(g) => println!("brute_force {}", fmt(g)),
        Err(Error::Size(msg)) => println!("brute_force skipped={msg}"),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn compare(cli: &Cli, args: &CompareArgs) -> anyhow::Result<()> {
    let a = harness::read_summary(&args.a)?;
    let b = harness::read_summary(&args.b)?;
    let report = harness::compare_runs(&a, &b, args.threshold)?;
    println!("{report}");
    if let Some(out) = &cli.out {
        report.write_csv(out)?;
    }
    Ok(())
}

//! `detpac` command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use detpac::harness::{self, ExperimentConfig, TrialRecord};
use detpac::instances;
use detpac::io::{arc_map, demand_from_json, demand_to_json, instance_from_json, instance_to_json, CutReport};
use detpac::learner::{run_eprl, RunConfig, DEFAULT_BUDGET};
use detpac::{extract_policy_cover, min_flow, DemandFn, DeterministicMdp, Error, RewardKind, SamplingRule};
use serde_json::json;

#[derive(Parser)]
#[command(name = "detpac", version, about = "PAC policy identification in deterministic MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Instance-dependent lower bound report.
    Lb(LbArgs),
    /// Minimum flow, maximum cut and policy cover for a demand.
    Flow(FlowArgs),
    /// One learning run.
    Run(RunArgs),
    /// Monte-Carlo batch: CSV rows plus a summary.
    Bench(BenchArgs),
    /// Value and return gaps of every arc.
    Gaps(GapsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Hard,
    VisitsVsGap,
    RegretVsBpi,
    RandomLayered,
    RandomTree,
    Bandit,
    Chain,
    CoverElim,
}

#[derive(Args)]
struct OutArg {
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long = "S", default_value_t = 8)]
    states: usize,
    #[arg(long = "A", default_value_t = 2)]
    actions: usize,
    #[arg(long = "H", default_value_t = 3)]
    horizon: usize,
    /// Gap parameter of the visits-vs-gap and regret-vs-bpi families.
    #[arg(long, default_value_t = 0.5)]
    delta_gap: f64,
    /// Gaussian rewards with this variance instead of Bernoulli (regret-vs-bpi, bandit, chain).
    #[arg(long)]
    gaussian: Option<f64>,
    /// Comma-separated arm means (bandit, chain).
    #[arg(long, value_delimiter = ',')]
    means: Vec<f64>,
    #[arg(long, default_value_t = 0.8)]
    density: f64,
    #[arg(long, default_value_t = 2)]
    branching: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of parallel branches of the cover-elimination instance.
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long)]
    without_bar_arc: bool,
    /// Also write the unit demand of the cover-elimination instance (bar arc zeroed).
    #[arg(long)]
    demand_out: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct LbArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0.25)]
    sigma2: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct FlowArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Demand file; every arc gets demand one when omitted.
    #[arg(long)]
    demand: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "max-coverage")]
    rule: SamplingRule,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long, default_value_t = 1)]
    elim_period: u64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    learn: LearnArgs,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    learn: LearnArgs,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Where to write the summary JSON (stderr when omitted).
    #[arg(long)]
    summary: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct GapsArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[command(flatten)]
    out: OutArg,
}

fn emit(out: &OutArg, text: &str) -> anyhow::Result<()> {
    match &out.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn pretty(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn load_instance(path: &Path) -> anyhow::Result<DeterministicMdp> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(instance_from_json(&text)?)
}

fn reward_kind(gaussian: Option<f64>) -> RewardKind {
    gaussian.map_or(RewardKind::Bernoulli, RewardKind::Gaussian)
}

fn cmd_gen(args: &GenArgs) -> anyhow::Result<()> {
    if args.demand_out.is_some() && !matches!(args.kind, Kind::CoverElim) {
        bail!(Error::InvalidParameters("--demand-out only applies to --kind cover-elim".into()));
    }
    let (s, a, h) = (args.states, args.actions, args.horizon);
    let kind = reward_kind(args.gaussian);
    let mdp = match args.kind {
        Kind::Hard => instances::hard_instance(s, a, h)?,
        Kind::VisitsVsGap => instances::visits_vs_gap(s, a, h, args.delta_gap)?,
        Kind::RegretVsBpi => instances::regret_vs_bpi(s, a, h, args.delta_gap, kind)?,
        Kind::RandomLayered => instances::random_layered(s, a, h, args.density, args.seed)?,
        Kind::RandomTree => instances::random_tree(args.branching, h, args.seed)?,
        Kind::Bandit => instances::bandit(&args.means, kind)?,
        Kind::Chain => instances::chain(h, &args.means, kind)?,
        Kind::CoverElim => {
            let (mdp, bar) = instances::cover_elimination(args.m, !args.without_bar_arc)?;
            if let Some(path) = &args.demand_out {
                let mut values = vec![1.0; mdp.num_arcs()];
                if let Some(bar) = bar {
                    values[bar] = 0.0;
                }
                let demand = DemandFn::new(&mdp, values)?;
                fs::write(path, demand_to_json(&mdp, &demand) + "\n")
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            mdp
        }
    };
    emit(&args.out, &(instance_to_json(&mdp) + "\n"))
}

fn cmd_lb(args: &LbArgs) -> anyhow::Result<()> {
    let mdp = load_instance(&args.instance)?;
    let report = instances::theorem1_lower_bound(&mdp, args.eps, args.delta, args.sigma2)?;
    emit(
        &args.out,
        &pretty(&json!({
            "eps": report.eps,
            "delta": report.delta,
            "sigma2": report.sigma2,
            "phi_star": report.phi_star,
            "stage_max": report.stage_max,
            "total": report.total,
            "sandwich_holds": report.sandwich_holds(),
            "tree_bound": report.tree_bound,
            "demand": arc_map(&mdp, &report.demand),
        })),
    )
}

fn cmd_flow(args: &FlowArgs) -> anyhow::Result<()> {
    let mdp = load_instance(&args.instance)?;
    let demand = match &args.demand {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            demand_from_json(&mdp, &text)?
        }
        None => DemandFn::constant(&mdp, 1.0),
    };
    let (flow, cut) = min_flow(&mdp, &demand);
    let cover = match extract_policy_cover(&mdp, &flow) {
        Ok(cover) => Some(
            cover
                .policies()
                .iter()
                .map(|p| {
                    let keys: Vec<String> = mdp.rollout(p).arcs().iter().map(|&a| mdp.arc_key(a)).collect();
                    json!({ "policy": p.table(), "trajectory": keys })
                })
                .collect::<Vec<_>>(),
        ),
        Err(Error::NonIntegralFlow(_)) => None,
        Err(e) => return Err(e.into()),
    };
    emit(
        &args.out,
        &pretty(&json!({
            "phi_star": flow.value(),
            "flow": arc_map(&mdp, flow.values()),
            "cut": CutReport::new(&mdp, &cut),
            "cover": cover,
        })),
    )
}

fn run_config(args: &LearnArgs) -> RunConfig {
    RunConfig {
        rule: args.rule,
        eps: args.eps,
        delta: args.delta,
        budget: args.budget,
        elim_period: args.elim_period,
    }
}

fn cmd_run(args: &RunArgs) -> anyhow::Result<()> {
    let mdp = load_instance(&args.learn.instance)?;
    let result = run_eprl(&mdp, &run_config(&args.learn), args.learn.seed)?;
    emit(&args.out, &pretty(&result))
}

fn cmd_bench(args: &BenchArgs) -> anyhow::Result<()> {
    let learn = &args.learn;
    let config = ExperimentConfig {
        rule: learn.rule,
        eps: learn.eps,
        delta: learn.delta,
        trials: args.trials,
        seed: learn.seed,
        budget: learn.budget,
        elim_period: learn.elim_period,
    };
    config.validate()?;
    let mdp = load_instance(&learn.instance)?;
    let trials = harness::run_trials(&mdp, &config)?;
    let records: Vec<TrialRecord> = trials.iter().map(|t| TrialRecord::new(&config, t)).collect();
    let mut csv = Vec::new();
    harness::write_csv(&mut csv, &records)?;
    emit(&args.out, std::str::from_utf8(&csv)?)?;

    let mut summary = harness::summarize(&config, &trials);
    summary.lower_bound_quarter = Some(instances::theorem1_lower_bound(&mdp, config.eps, config.delta, 0.25)?.phi_star);
    summary.lower_bound_unit = Some(instances::theorem1_lower_bound(&mdp, config.eps, config.delta, 1.0)?.phi_star);
    let text = pretty(&summary);
    match &args.summary {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => eprint!("{text}"),
    }
    Ok(())
}

fn cmd_gaps(args: &GapsArgs) -> anyhow::Result<()> {
    let mdp = load_instance(&args.instance)?;
    let gaps = mdp.compute_gaps();
    let arcs: Vec<_> = (0..mdp.num_arcs())
        .map(|a| {
            json!({
                "arc": mdp.arc_key(a),
                "mean": mdp.arc(a).mean,
                "value_gap": gaps.value_gap(a),
                "return_gap": gaps.return_gap(a),
            })
        })
        .collect();
    let stage_min: Vec<f64> = (0..mdp.horizon()).map(|h| gaps.stage_min_return_gap(h, args.eps)).collect();
    emit(
        &args.out,
        &pretty(&json!({
            "optimal_value": gaps.optimal_value(),
            "unique_optimal_trajectory": gaps.unique_optimal_trajectory(),
            "min_return_gap": gaps.min_return_gap(),
            "stage_min_return_gap": stage_min,
            "arcs": arcs,
        })),
    )
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(value) = std::env::var("DETPAC_THREADS") {
        let n: usize = value
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("DETPAC_THREADS = '{value}' is not a thread count")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Lb(a) => cmd_lb(a),
        Command::Flow(a) => cmd_flow(a),
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Gaps(a) => cmd_gaps(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = match err.downcast_ref::<Error>() {
                Some(e) => e.kind(),
                None if err.downcast_ref::<std::io::Error>().is_some() => "io",
                None => "error",
            };
            let message = format!("{err:#}");
            eprintln!("{}", json!({ "error": kind, "message": message }));
            ExitCode::FAILURE
        }
    }
}

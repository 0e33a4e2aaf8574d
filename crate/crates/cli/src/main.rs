//! `psro` — experiment runner for tabular PSRO and its joint-experience
//! best-response variants on small imperfect-information games.
//!
//! Exit codes: 0 success, 1 run or validation failure, 2 configuration error.

mod exec;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use psro_core::psro::theory_check_perturbation;
use psro_core::{build_game, GameId};

use exec::{execute_all, schema_check_dir, summarize_dir, write_summary, SWEEP_HEADER};
use spec::ExperimentSpec;

#[derive(Parser)]
#[command(name = "psro", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment grid and write per-run CSVs plus a summary.
    Run(RunArgs),
    /// Sweep the exploration rate for one exploration kind.
    DeltaSweep(SweepArgs),
    /// Check the perturbed-best-response bound empirically.
    TheoryCheck(TheoryArgs),
    /// Validate every CSV in a directory against the documented schemas.
    SchemaCheck(SchemaArgs),
    /// Print the expanded run grid of a spec without executing it.
    ShowConfig(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Spec file in the flat `key = value` format.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Game id: `kuhn`, `leduc`, or `matrix:<seed>:<m>x<n>`.
    #[arg(long)]
    game: Option<String>,
    /// Comma-separated method tokens, e.g. `psro,jbr,jbr-dt:h10`.
    #[arg(long)]
    method: Option<String>,
    /// Comma-separated exploration rates for delta-using methods.
    #[arg(long)]
    delta: Option<String>,
    /// Comma-separated seeds.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    iterations: Option<u32>,
    #[arg(long)]
    budget: Option<u32>,
    #[arg(long = "hybrid-k")]
    hybrid_k: Option<u32>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory (defaults to $PSRO_OUT_DIR, then `runs`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker pool size.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value = "leduc")]
    game: String,
    /// Exploration kind: `random` or `targeted`.
    #[arg(long)]
    kind: String,
    /// Comma-separated delta values to sweep.
    #[arg(long)]
    deltas: String,
    #[arg(long, default_value = "0,1,2")]
    seeds: String,
    #[arg(long, default_value_t = 100)]
    iterations: u32,
    #[arg(long, default_value_t = 10_000)]
    budget: u32,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, default_value = "kuhn")]
    game: String,
    #[arg(long, default_value_t = 100)]
    trials: u32,
    #[arg(long, default_value = "0.1,0.5")]
    deltas: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report file (defaults to stdout only).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SchemaArgs {
    /// Directory holding the CSVs to validate.
    #[arg(long)]
    dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Errors escaping `dispatch` are configuration errors (exit 2); execution
/// failures are mapped to exit 1 inside each command.
fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::DeltaSweep(args) => cmd_delta_sweep(args),
        Command::TheoryCheck(args) => cmd_theory_check(args),
        Command::SchemaCheck(args) => cmd_schema_check(args),
        Command::ShowConfig(args) => cmd_show_config(args),
    }
}

fn build_spec(args: &ConfigArgs) -> Result<ExperimentSpec> {
    let mut spec = match &args.spec {
        Some(path) => ExperimentSpec::load(path)?,
        None => ExperimentSpec::default(),
    };
    if let Some(game) = &args.game {
        spec.apply("game", game)?;
    }
    if let Some(method) = &args.method {
        spec.apply("methods", method)?;
    }
    if let Some(delta) = &args.delta {
        spec.apply("deltas", delta)?;
    }
    if let Some(seeds) = &args.seeds {
        spec.apply("seeds", seeds)?;
    }
    if let Some(iterations) = args.iterations {
        spec.iterations = iterations;
    }
    if let Some(budget) = args.budget {
        spec.budget = budget;
    }
    if let Some(k) = args.hybrid_k {
        spec.hybrid_k = k;
    }
    if spec.methods.is_empty() {
        anyhow::bail!("no methods given (use --method or a spec file)");
    }
    Ok(spec)
}

fn resolve_out(flag: Option<PathBuf>, spec_out: Option<PathBuf>) -> PathBuf {
    flag.or(spec_out)
        .or_else(|| std::env::var_os("PSRO_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let spec = build_spec(&args.config)?;
    let runs = spec.expand()?;
    let out_dir = resolve_out(args.out, spec.out.clone());
    let jobs = args.jobs.unwrap_or(spec.jobs);
    println!("executing {} runs into `{}` ({jobs} workers)", runs.len(), out_dir.display());
    let outcomes = match execute_all(&runs, &out_dir, jobs) {
        Ok(outcomes) => outcomes,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Ok(ExitCode::from(1));
        }
    };
    let mut failed = 0;
    for outcome in &outcomes {
        match &outcome.error {
            None => println!(
                "  {:<40} min_nashconv={:<12.6} episodes={}",
                outcome.stem, outcome.min_nashconv, outcome.total_episodes
            ),
            Some(e) => {
                failed += 1;
                eprintln!("  {:<40} FAILED: {e}", outcome.stem);
            }
        }
    }
    let rows = summarize_dir(&out_dir)?;
    write_summary(&out_dir.join("summary.csv"), &rows)?;
    println!("summary ({} method rows) -> {}", rows.len(), out_dir.join("summary.csv").display());
    for row in &rows {
        println!(
            "  {:<8} {:<16} runs={} median_min_nashconv={:.6} episodes/run={}",
            row.game, row.method, row.runs, row.median_min_nashconv, row.total_episodes_per_run
        );
    }
    Ok(if failed > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn cmd_delta_sweep(args: SweepArgs) -> Result<ExitCode> {
    let method = match args.kind.as_str() {
        "random" => "jbr-dr",
        "targeted" => "jbr-dt",
        other => anyhow::bail!("kind must be `random` or `targeted`, got `{other}`"),
    };
    let mut spec = ExperimentSpec::default();
    spec.apply("game", &args.game)?;
    spec.apply("methods", method)?;
    spec.apply("deltas", &args.deltas)?;
    spec.apply("seeds", &args.seeds)?;
    spec.iterations = args.iterations;
    spec.budget = args.budget;
    let deltas = spec.deltas.clone();
    for &d in &deltas {
        if !(0.0..=1.0).contains(&d) {
            anyhow::bail!("delta {d} outside [0, 1]");
        }
    }
    let runs = spec.expand()?;
    let out_dir = resolve_out(args.out, None);
    let jobs = args.jobs.unwrap_or(1);
    println!("sweeping {} over delta in {:?} on {}", args.kind, deltas, args.game);
    let outcomes = match execute_all(&runs, &out_dir, jobs) {
        Ok(outcomes) => outcomes,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Ok(ExitCode::from(1));
        }
    };
    if outcomes.iter().any(|o| o.error.is_some()) {
        for o in outcomes.iter().filter(|o| o.error.is_some()) {
            eprintln!("  {} FAILED: {}", o.stem, o.error.as_ref().unwrap());
        }
        return Ok(ExitCode::from(1));
    }
    let mut table = format!("{SWEEP_HEADER}\n");
    println!("{:<8} {:<10} median_min_nashconv", "delta", "kind");
    for &delta in &deltas {
        let mut mins: Vec<f64> = outcomes
            .iter()
            .filter(|o| o.cfg.effective_delta() == delta)
            .map(|o| o.min_nashconv)
            .collect();
        mins.sort_by(f64::total_cmp);
        let median = mins[mins.len() / 2];
        println!("{delta:<8} {:<10} {median:.6}", args.kind);
        table.push_str(&format!("{delta},{},{median}\n", args.kind));
    }
    let plot = out_dir.join(format!("delta_sweep_{}.csv", args.kind));
    std::fs::write(&plot, table)?;
    println!("plot data -> {}", plot.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_theory_check(args: TheoryArgs) -> Result<ExitCode> {
    let id: GameId = args.game.parse().map_err(|e| anyhow!("{e}"))?;
    let game = build_game(id).map_err(|e| anyhow!("{e}"))?;
    let deltas: Vec<f64> = args
        .deltas
        .split(',')
        .map(|s| s.trim().parse().context("bad delta"))
        .collect::<Result<_>>()?;
    let report = if args.trials == 0 {
        psro_core::psro::PerturbationReport::default()
    } else {
        match theory_check_perturbation(&game, args.trials, &deltas, args.seed) {
            Ok(report) => report,
            Err(e) => {
                eprintln!("error: {e}");
                return Ok(ExitCode::from(1));
            }
        }
    };
    let text = format!("game: {}\ntrials per delta: {}\n{report}", args.game, args.trials);
    print!("{text}");
    if let Some(path) = &args.out {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, &text)?;
        println!("report -> {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_schema_check(args: SchemaArgs) -> Result<ExitCode> {
    match schema_check_dir(&args.dir) {
        Ok(n) => {
            println!("{n} CSV files conform to the documented schemas");
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            eprintln!("schema check failed: {e:#}");
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_show_config(args: ConfigArgs) -> Result<ExitCode> {
    let spec = build_spec(&args)?;
    let runs = spec.expand()?;
    println!("{} runs:", runs.len());
    println!(
        "{:<8} {:<16} {:<6} {:<11} {:<8} {:<9} {}",
        "game", "method", "seed", "iterations", "budget", "delta", "spi"
    );
    for cfg in &runs {
        println!(
            "{:<8} {:<16} {:<6} {:<11} {:<8} {:<9} {:?}",
            cfg.game.to_string(),
            cfg.label(),
            cfg.seed,
            cfg.iterations,
            cfg.budget,
            cfg.effective_delta(),
            cfg.spi
        );
    }
    Ok(ExitCode::SUCCESS)
}


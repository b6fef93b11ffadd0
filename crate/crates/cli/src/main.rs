use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hyperlocal::harness::{emit_csv, read_csv, run_experiment, stats, write_csv, ExperimentConfig};
use hyperlocal::instance_file::{read_instance, save_instance, write_instance};
use hyperlocal::offline::{
    exhaustive_dmtc, exhaustive_fmtc, greedy_dmtc, greedy_fmtc, CampaignBipartiteGraph, OfflineSolution,
    DEFAULT_CAP,
};
use hyperlocal::workload::{generate_campaign, ingest_checkins, CheckinOptions};

#[derive(Parser)]
#[command(name = "hyperlocal", version, about = "Task assignment experiments for hyperlocal spatial crowdsourcing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a campaign instance file from the workload generator or a check-in CSV.
    Generate(GenerateArgs),
    /// Run an experiment config and write one CSV row per config and seed.
    Run(RunArgs),
    /// Solve an instance offline and print coverage and selections.
    Oracle(OracleArgs),
    /// Five-number summary of a metric per config.
    Stats(StatsArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// File of `gen.* = value` lines.
    config: Option<PathBuf>,
    /// Override a key, e.g. `--set gen.periods=12`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ingest this check-in CSV instead of generating.
    #[arg(long, requires = "tasks")]
    checkins: Option<PathBuf>,
    /// Instance file whose tasks accompany the check-ins.
    #[arg(long)]
    tasks: Option<PathBuf>,
    /// Period length in timestamp units.
    #[arg(long, default_value_t = 1.0)]
    period_length: f64,
    /// Start of period 1; defaults to the earliest check-in.
    #[arg(long)]
    start: Option<f64>,
    #[arg(long)]
    periods: Option<u32>,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Comma-separated seed list, replacing `seeds`.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    jobs: Option<usize>,
    /// CSV path; the histogram goes next to it. Stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Solver {
    Exhaustive,
    Greedy,
    All,
}

#[derive(Args)]
struct OracleArgs {
    instance: PathBuf,
    /// Campaign budget for the dynamic problem.
    #[arg(long, short = 'k')]
    budget: Option<usize>,
    /// Comma-separated per-period budgets for the fixed problem.
    #[arg(long, value_delimiter = ',')]
    per_period: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value_t = Solver::All)]
    solver: Solver,
    /// Enumeration limit for the exhaustive solvers.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u64,
}

#[derive(Args)]
struct StatsArgs {
    csv: PathBuf,
    #[arg(long, default_value = "coverage")]
    metric: String,
}

fn overrides(set: &[String]) -> Result<Vec<(String, String)>> {
    set.iter()
        .map(|s| {
            let (k, v) = s.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got `{s}`"))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn generate(args: GenerateArgs) -> Result<()> {
    let instance = if let Some(checkins) = &args.checkins {
        let tasks_path = args.tasks.as_ref().expect("clap enforces --tasks");
        let template = read_instance(tasks_path).with_context(|| format!("reading {}", tasks_path.display()))?;
        let report = ingest_checkins(
            checkins,
            template.tasks().to_vec(),
            &CheckinOptions {
                period_length: args.period_length,
                area: *template.area(),
                start: args.start,
                num_periods: args.periods,
            },
        )
        .with_context(|| format!("ingesting {}", checkins.display()))?;
        eprintln!(
            "{} rows: {} out of area, {} out of range, {} repeat check-ins",
            report.rows, report.dropped_out_of_area, report.dropped_out_of_range, report.duplicates
        );
        report.instance
    } else {
        let text = match &args.config {
            Some(p) => read_text(p)?,
            None => String::new(),
        };
        let mut cfg = ExperimentConfig::parse_generator(&text, &overrides(&args.set)?)?;
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        generate_campaign(&cfg)?
    };
    match &args.output {
        Some(path) => save_instance(&instance, path).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(write_instance(&instance).as_bytes())?,
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let text = read_text(&args.config)?;
    let mut pairs = overrides(&args.set)?;
    if let Some(seeds) = args.seed {
        pairs.push(("seeds".into(), seeds));
    }
    if let Some(jobs) = args.jobs {
        pairs.push(("harness.jobs".into(), jobs.to_string()));
    }
    let cfg = ExperimentConfig::parse(&text, &pairs).with_context(|| format!("in {}", args.config.display()))?;
    let rows = run_experiment(&cfg)?;
    match &args.output {
        Some(path) => emit_csv(&rows, path).with_context(|| format!("writing {}", path.display()))?,
        None => write_csv(&rows, std::io::stdout().lock())?,
    }
    Ok(())
}

fn print_solution(label: &str, graph: &CampaignBipartiteGraph, sol: &OfflineSolution) {
    let counts: Vec<String> = sol.per_period_counts(graph).iter().map(|c| c.to_string()).collect();
    let pairs: Vec<String> = sol.pairs(graph).iter().map(|(w, p)| format!("{w}@{p}")).collect();
    println!(
        "{label}\tcoverage={}\tper_period={}\tselected={}",
        sol.coverage,
        counts.join(","),
        pairs.join(" ")
    );
}

fn oracle(args: OracleArgs) -> Result<()> {
    let instance = read_instance(&args.instance).with_context(|| format!("reading {}", args.instance.display()))?;
    if args.budget.is_none() && args.per_period.is_none() {
        bail!("give --budget, --per-period, or both");
    }
    let graph = CampaignBipartiteGraph::build(&instance);
    let exhaustive = matches!(args.solver, Solver::Exhaustive | Solver::All);
    let greedy = matches!(args.solver, Solver::Greedy | Solver::All);
    if let Some(per) = &args.per_period {
        if exhaustive {
            print_solution("fixed-exhaustive", &graph, &exhaustive_fmtc(&graph, per, args.cap)?);
        }
        if greedy {
            print_solution("fixed-greedy", &graph, &greedy_fmtc(&graph, per)?);
        }
    }
    if let Some(k) = args.budget {
        if exhaustive {
            print_solution("dynamic-exhaustive", &graph, &exhaustive_dmtc(&graph, k, args.cap)?);
        }
        if greedy {
            print_solution("dynamic-greedy", &graph, &greedy_dmtc(&graph, k));
        }
    }
    Ok(())
}

fn summarize(args: StatsArgs) -> Result<()> {
    let rows = read_csv(&args.csv).with_context(|| format!("reading {}", args.csv.display()))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "config,metric,n,min,q1,median,q3,max")?;
    for s in stats(&rows, &args.metric)? {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.config, s.metric, s.n, s.min, s.q1, s.median, s.q3, s.max
        )?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Oracle(a) => oracle(a),
        Command::Stats(a) => summarize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

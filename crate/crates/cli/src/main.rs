use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use ladderlab::{emit_report, parse_scenario, run_experiment, ExperimentKind, ReportBundle};

#[derive(Parser)]
#[command(name = "ladderlab", version, about = "Ladder exponents, first passage and excursion experiments for Lévy processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factorization, ladder constants and first-passage tables only.
    Analyze(RunArgs),
    /// Every experiment listed in the scenario.
    Verify(RunArgs),
    /// Tail-class diagnostics only.
    Tailclass(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Output directory for CSV files and summary.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); results do not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn run(args: &RunArgs, only: Option<&[ExperimentKind]>) -> anyhow::Result<(ReportBundle, i32)> {
    let text = std::fs::read_to_string(&args.scenario)
        .with_context(|| format!("reading {}", args.scenario.display()))?;
    let mut scenario = parse_scenario(&text)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let bundle = ladderlab_core::rng::with_threads(args.threads, || run_experiment(&scenario, only));
    let code = emit_report(&bundle, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    Ok((bundle, code))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, only): (&RunArgs, Option<&[ExperimentKind]>) = match &cli.command {
        Command::Analyze(a) => (a, Some(&[ExperimentKind::Analyze])),
        Command::Verify(a) => (a, None),
        Command::Tailclass(a) => (a, Some(&[ExperimentKind::Tailclass])),
    };
    match run(args, only) {
        Ok((bundle, code)) => {
            for e in &bundle.experiments {
                let reason = e.reason.as_deref().map(|r| format!(" ({r})")).unwrap_or_default();
                println!("{:<14} {:?}{reason}  [{:.2}s]", e.name, e.status, e.wall_clock_s);
            }
            if bundle.experiments.iter().all(|e| e.status == ladderlab::Status::Skipped) {
                println!("skipped: all");
            }
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

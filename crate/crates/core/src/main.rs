use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use clinic_window::experiment::{
    run_curves, run_joint, run_levers, run_simulate, run_tables, ExperimentConfig, RunOutput,
};
use clinic_window::showup::DelayMap;

/// Optimal booking windows for clinics with delay-dependent no-shows.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,

    /// TOML experiment config; the shipped default is used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `output_dir` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Position-to-delay mapping(s) to run.
    #[arg(long, global = true, value_enum)]
    delay_map: Option<DelayMapArg>,

    /// Window grid step for the tables.
    #[arg(long, global = true)]
    k_step: Option<usize>,

    /// Simulation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Exit nonzero when any cell failed.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Verb {
    /// Optimal window and efficiency gain tables.
    Tables,
    /// Show-up probability curves.
    Curves,
    /// Window gains after optimizing panel size and capacity.
    Levers,
    /// Joint (lambda, mu, K) optimum against the sequential procedure.
    Joint,
    /// Discrete-event simulation of one configured queue.
    Simulate,
}

#[derive(ValueEnum, Clone, Copy)]
enum DelayMapArg {
    Slots,
    SlotsOverMu,
    Both,
}

fn run(cli: &Cli) -> anyhow::Result<RunOutput> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default_config(),
    };
    if let Some(dm) = cli.delay_map {
        cfg.delay_maps = match dm {
            DelayMapArg::Slots => vec![DelayMap::SlotsAsDays],
            DelayMapArg::SlotsOverMu => vec![DelayMap::SlotsOverMu],
            DelayMapArg::Both => vec![DelayMap::SlotsOverMu, DelayMap::SlotsAsDays],
        };
    }
    if let Some(step) = cli.k_step {
        cfg.window.k_step = step;
    }
    if let Some(seed) = cli.seed {
        cfg.simulate.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    let (output, log) = match cli.verb {
        Verb::Tables => (run_tables(&cfg)?, "runlog.jsonl"),
        Verb::Curves => (run_curves(&cfg)?, "runlog_curves.jsonl"),
        Verb::Levers => (run_levers(&cfg)?, "runlog_levers.jsonl"),
        Verb::Joint => (run_joint(&cfg)?, "runlog_joint.jsonl"),
        Verb::Simulate => (run_simulate(&cfg)?, "runlog_simulate.jsonl"),
    };
    output
        .write(&cfg.output_dir, log)
        .with_context(|| format!("writing {}", cfg.output_dir.display()))?;
    for (path, _) in &output.files {
        println!("{}", cfg.output_dir.join(path).display());
    }
    Ok(output)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) if cli.strict && out.errors > 0 => {
            eprintln!("{} cell(s) failed", out.errors);
            ExitCode::from(2)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

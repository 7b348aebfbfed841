use anyhow::Context;
use clap::Parser;
use nsring::config::RunConfig;
use nsring::pipeline::{load_config, Command, Pipeline, EXIT_CONFIG};
use std::path::PathBuf;
use std::process::ExitCode;

/// Run the vortex-ring instability pipeline or one of its stages.
///
/// Exit status: 0 all certificates pass, 2 invalid config, 3 a stage
/// certificate failed, 4 numerical non-convergence.
#[derive(Debug, Parser)]
#[command(name = "nsring", version)]
struct Args {
    /// Run config (TOML); the shipped config when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// search2d, truncate, axisym-sweep, beta-sweep, semigroup, manifold,
    /// verify or full-pipeline.
    #[arg(long, value_name = "NAME", default_value = "full-pipeline")]
    stage: String,
    /// Worker threads for sweep entries (overrides `run.workers`).
    #[arg(long, value_name = "K")]
    workers: Option<usize>,
    /// Output directory (overrides `run.out`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Print the shipped config and exit.
    #[arg(long)]
    print_config: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.print_config {
        print!("{}", RunConfig::default().to_text());
        return ExitCode::SUCCESS;
    }
    let command: Command = match args.stage.parse() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let cfg = match load_config(args.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    if args.workers == Some(0) {
        eprintln!("error: --workers must be at least 1");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    match run(cfg, command, args.out, args.workers) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cfg: RunConfig, command: Command, out: Option<PathBuf>, workers: Option<usize>) -> anyhow::Result<i32> {
    let mut pipeline = Pipeline::new(cfg, out, workers).context("setting up the output directory")?;
    let report = pipeline.run(command).context("writing artifacts")?;
    for s in &report.stages {
        match &s.message {
            Some(m) => println!("{:<13} {:<7} {m}", s.stage.name(), s.status),
            None => println!("{:<13} {}", s.stage.name(), s.status),
        }
    }
    println!("artifacts in {}", pipeline.out.display());
    Ok(report.exit_code)
}

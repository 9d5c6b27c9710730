use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fredholm_cli::{commands, config, CliError};

#[derive(Parser)]
#[command(name = "fredholm", version, about = "Regularized Fredholm equations of the first kind by interacting particles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides "output" in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    workers: Option<usize>,
    /// Seed base (overrides "seed_base" in the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the particle solver for every replicate and write its artefacts.
    Run(Common),
    /// Cross-validate the regularization strength.
    Cv(Common),
    /// Run a grid or analytic baseline.
    Baseline(Common),
    /// Recompute metrics from stored final clouds.
    Metrics(Common),
}

fn execute(cli: Cli) -> Result<String, CliError> {
    let (common, f): (&Common, fn(&config::Resolved, &std::path::Path) -> Result<String, CliError>) = match &cli.command {
        Command::Run(c) => (c, commands::cmd_run),
        Command::Cv(c) => (c, commands::cmd_cv),
        Command::Baseline(c) => (c, commands::cmd_baseline),
        Command::Metrics(c) => (c, commands::cmd_metrics),
    };
    let cfg = config::load(&common.config)?;
    let resolved = cfg.resolve(common.seed)?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set \"output\"".into()))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = common.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| CliError::Io(e.to_string()))?;
    pool.install(|| f(&resolved, &out))
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

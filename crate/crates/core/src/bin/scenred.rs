use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use scenred::pipeline::{self, Config, Context, Overrides};
use scenred::{Error, Result};

/// Scenario reduction for two-stage stochastic unit commitment.
#[derive(Parser, Debug)]
#[command(name = "scenred", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for cost matrices and evaluations.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Replace the configured seeds with this single seed.
    #[arg(long, global = true)]
    seed_override: Option<u64>,

    /// Relative MIP gap.
    #[arg(long, global = true)]
    gap: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cost matrices, selected indices, masses and distances for one draw.
    Reduce,
    /// Full reduce-solve-evaluate loop; writes results.csv.
    Pipeline,
    /// Self-checks; nonzero exit on any failing suite.
    Verify,
    /// Quantile summary of a results file.
    Stats {
        /// results.csv written by `pipeline`.
        results: PathBuf,
    },
}

fn context(cli: &Cli) -> Result<Context> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = Config::load(path)?;
    cfg.apply(&Overrides {
        seed: cli.seed_override,
        gap: cli.gap,
        workers: cli.workers,
    })?;
    Context::new(cfg)
}

fn run(cli: &Cli) -> Result<PathBuf> {
    if let Command::Stats { results } = &cli.command {
        return pipeline::cmd_stats(results, &cli.out);
    }
    let ctx = context(cli)?;
    let workers = ctx.config.workers;
    pipeline::with_workers(workers, || match cli.command {
        Command::Reduce => pipeline::write_reduction(&pipeline::cmd_reduce(&ctx)?, &cli.out),
        Command::Pipeline => {
            let run = pipeline::cmd_pipeline(&ctx)?;
            if !run.failures.is_empty() {
                log::warn!("{} cells failed; see failures.csv", run.failures.len());
            }
            pipeline::write_pipeline(&run, &cli.out)
        }
        Command::Verify => pipeline::write_verify(&pipeline::cmd_verify(&ctx, None)?, &cli.out),
        Command::Stats { .. } => unreachable!(),
    })?
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

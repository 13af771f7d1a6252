use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use projsa_cli::commands;

#[derive(Parser)]
#[command(
    name = "projsa",
    version,
    about = "Projected stochastic approximation experiments: seeded replicas, CSV traces, trajectory diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config: one trace per replica plus a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Concurrent replicas.
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        /// Added to every configured seed.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
    },
    /// Recompute trajectory diagnostics from a recorded trace.
    Diagnose {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized prox-vs-grid-oracle verification.
    ProxSelftest {
        /// Instances per penalty variant (and per boxed/unboxed mode).
        #[arg(long, default_value_t = 10_000)]
        instances: u64,
        /// Internal fault-injection hook: corrupt the oracle's lambda sign.
        #[arg(long, hide = true, default_value_t = false)]
        corrupt_lambda_sign: bool,
    },
    /// Run SA replicas against the projected Euler flow and tabulate
    /// sup distances over the configured shift grid.
    OdeCompare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
    },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, jobs, seed_offset } => {
            commands::cmd_run(&config, out.as_deref(), jobs, seed_offset).map(|art| {
                println!(
                    "wrote {} trace(s) and {}",
                    art.trace_paths.len(),
                    art.summary_path.display()
                );
            })
        }
        Command::Diagnose { trace, config, out } => {
            commands::cmd_diagnose(&trace, &config, out.as_deref()).map(|path| {
                println!("wrote {}", path.display());
            })
        }
        Command::ProxSelftest { instances, corrupt_lambda_sign } => {
            let outcome = commands::cmd_prox_selftest(instances, corrupt_lambda_sign);
            return if outcome.passed { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
        Command::OdeCompare { config, out, jobs, seed_offset } => {
            commands::cmd_ode_compare(&config, out.as_deref(), jobs, seed_offset).map(|path| {
                println!("wrote {}", path.display());
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "qrp",
    version,
    about = "Simulate qubit quantum renewal processes and quantify their non-Markovianity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results are identical for any value.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the trace-distance curve for a fixed pair and detect revivals.
    Simulate(CommonArgs),
    /// Evaluate revival counts and measures over a parameter grid.
    Sweep(CommonArgs),
    /// Optimize the non-Markovianity measure over antipodal pure pairs.
    Optimize(CommonArgs),
    /// Evaluate the pure-jump parity oracle and compare it to Monte Carlo.
    Analytic(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Simulate(args) => ("simulate", args),
        Command::Sweep(args) => ("sweep", args),
        Command::Optimize(args) => ("optimize", args),
        Command::Analytic(args) => ("analytic", args),
    };

    let run = || qrp::cli::run_command(name, &args.config, args.seed, &args.out_dir);
    let result = match args.workers {
        Some(workers) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build();
            match pool {
                Ok(pool) => pool.install(run),
                Err(e) => {
                    eprintln!("error: cannot build worker pool: {e}");
                    return ExitCode::from(2);
                }
            }
        }
        None => run(),
    };

    match result {
        Ok(outputs) => {
            for file in outputs.files {
                println!("{}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

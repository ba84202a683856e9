use std::path::PathBuf;
use std::process::ExitCode;

use amalgam_cli::{run, Command, RunOptions};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "amalgam", version, about = "Moment oracles and random matrix checks for amalgamated free products")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tabulate oracle moments and conditional expectation norms
    Oracle(Args),
    /// Write draws of the model to a binary tuple file
    Sample(Args),
    /// Run the hypothesis checks and write report.json and rows.csv
    Verify(Args),
    /// Covering numbers and concentration bounds of sampled point clouds
    Cover(Args),
    /// Everything the config has sections for
    All(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, env = "AMALGAM_JOBS")]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Oracle(a) => (Command::Oracle, a),
        Cmd::Sample(a) => (Command::Sample, a),
        Cmd::Verify(a) => (Command::Verify, a),
        Cmd::Cover(a) => (Command::Cover, a),
        Cmd::All(a) => (Command::All, a),
    };
    if let Some(j) = args.jobs.filter(|&j| j > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            log::warn!("could not set {j} worker threads: {e}");
        }
    }
    let opts = RunOptions {
        config: args.config,
        seed: args.seed,
        out: args.out,
    };
    match run(command, &opts) {
        Ok(outcome) => {
            eprintln!(
                "{}: {} ({} files in {})",
                command.name(),
                if outcome.pass { "pass" } else { "FAIL" },
                outcome.files.len(),
                outcome.out_dir.display()
            );
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

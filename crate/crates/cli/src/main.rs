use std::path::PathBuf;
use std::process::ExitCode;

use boson_qpe_cli::{list_experiments, run, RunOptions, RunOutcome};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "boson-qpe", version, about = "Phase-estimation experiments on bosonic codes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Worker threads; defaults to every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Overrides the config's sampling seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Print the derived schedule and exit.
        #[arg(long)]
        dry_run: bool,
        /// Allow configs marked `extended`.
        #[arg(long)]
        extended: bool,
        /// Output root; falls back to $BOSON_QPE_OUTPUT, then ./results.
        #[arg(long)]
        output_root: Option<PathBuf>,
    },
    /// List the registered experiments.
    ListExperiments {
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::ListExperiments { json } => {
            print!("{}", list_experiments(json));
            if json {
                println!();
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, workers, seed, dry_run, extended, output_root } => {
            let mut opts = RunOptions { workers, seed, dry_run, extended, ..RunOptions::default() };
            if let Some(root) = output_root {
                opts.output_root = root;
            }
            match run(&config, &opts) {
                Ok(RunOutcome::DryRun(v)) => {
                    println!("{}", serde_json::to_string_pretty(&v).expect("json value"));
                    ExitCode::SUCCESS
                }
                Ok(RunOutcome::Written(dir)) => {
                    println!("{}", dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{}", e.to_json());
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}

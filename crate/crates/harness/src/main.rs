use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use probls_harness::summary::{expand_glob, summarize_files};
use probls_harness::{run_experiment, ExperimentConfig, HarnessError, RunOptions};

#[derive(Parser)]
#[command(name = "probls", version, about = "Run and summarise line-search experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every grid cell and seed of a config file.
    Run {
        config: PathBuf,
        /// Concurrent runs (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory; overrides the config and PROBLS_OUT_DIR.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Added to the configured first seed.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
    },
    /// Tabulate trace files matching a glob pattern.
    Summarize {
        pattern: String,
        /// Write the summary here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("probls: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Run {
            config,
            jobs,
            out,
            seed_offset,
        } => {
            let config = ExperimentConfig::load(&config)?;
            let report = run_experiment(
                &config,
                &RunOptions {
                    jobs,
                    out_dir: out,
                    seed_offset,
                },
            )?;
            println!(
                "wrote {} traces and {}",
                report.traces.len(),
                report.summary_path.display()
            );
        }
        Command::Summarize { pattern, out } => {
            let summary = summarize_files(&expand_glob(&pattern)?)?;
            match out {
                Some(path) => summary.write(&path)?,
                None => {
                    use std::io::Write;
                    std::io::stdout()
                        .write_all(&summary.to_bytes())
                        .map_err(|e| HarnessError::Io(e.to_string()))?;
                }
            }
        }
    }
    Ok(())
}

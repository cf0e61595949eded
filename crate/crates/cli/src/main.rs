use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sttmpc_cli::config::ExperimentConfig;
use sttmpc_cli::runner::{calibrate, default_out_dir, run_experiment};
use sttmpc_cli::table::{aggregate_volumes, load_groups, TABLE_TIMES};
use sttmpc_cli::{plot, CliError};

#[derive(Parser)]
#[command(name = "sttmpc", version, about = "Self-tuning tube MPC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (delta, seed) pair of the config and write traces, tables and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Override a config entry, e.g. `--set experiment.steps=5`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory [default: $STTMPC_OUT or ./sttmpc-out]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild the volume table from the traces of a run directory.
    Table {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Draw the volume and trajectory SVGs for a run directory.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Fit c3 on the pilot seeds of the [calibration] section.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, jobs, overrides, out } => {
            let cfg = ExperimentConfig::load(&config, &overrides)?;
            let out = out.unwrap_or_else(default_out_dir);
            let summary = run_experiment(&cfg, jobs, &out)?;
            println!("{} runs in {:.1}s, written to {}", summary.runs.len(), summary.runtime_seconds, out.display());
            print!("{}", std::fs::read_to_string(out.join("volumes.txt"))?);
        }
        Command::Table { input } => {
            let groups = load_groups(&input)?;
            if groups.is_empty() {
                return Err(CliError::Io(format!("no traces under {}", input.join("traces").display())));
            }
            let table = aggregate_volumes(&groups, &TABLE_TIMES);
            std::fs::write(input.join("volumes.csv"), table.to_csv())?;
            std::fs::write(input.join("volumes.txt"), table.to_text())?;
            print!("{}", table.to_text());
        }
        Command::Plot { input } => {
            for p in plot::emit_plots(&input)? {
                println!("{}", p.display());
            }
        }
        Command::Calibrate { config, jobs, overrides } => {
            let cfg = ExperimentConfig::load(&config, &overrides)?;
            let cal = calibrate(&cfg, jobs)?;
            println!("c3 = {:.6e} ({} pilots, quantile {}, safety {})", cal.c3, cal.per_run.len(), cal.quantile, cal.safety);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

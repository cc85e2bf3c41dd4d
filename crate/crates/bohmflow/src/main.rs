use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use bohmflow::{list_experiments, run_experiment, Experiment, ExperimentConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bohmflow", version, about = "Bohmian trajectory chaos experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its outputs plus manifest.json
    Run {
        experiment: String,
        /// Key/value config file; defaults apply to keys it omits
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Override a single key, `key=value`
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List experiments
    List,
    /// Print the accepted keys and defaults of an experiment
    Keys { experiment: String },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::List => {
            for (name, what) in list_experiments() {
                println!("{name:<22}{what}");
            }
        }
        Command::Keys { experiment } => {
            let e = Experiment::from_name(&experiment)?;
            for (k, v) in e.schema() {
                println!("{k} = {v}");
            }
        }
        Command::Run {
            experiment,
            config,
            out,
            overrides,
        } => {
            let e = Experiment::from_name(&experiment)?;
            let mut cfg = match &config {
                Some(path) => ExperimentConfig::load(e, path)?,
                None => ExperimentConfig::new(e),
            };
            for pair in &overrides {
                cfg.set_pair(pair)?;
            }
            let manifest = run_experiment(&cfg, &out).with_context(|| format!("running `{experiment}`"))?;
            for f in &manifest.files {
                println!("{}  {}", f.sha256, f.path);
            }
            eprintln!(
                "{} finished in {:.2}s, config {}",
                manifest.experiment, manifest.wall_time_seconds, manifest.config_digest
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thermid_cli::{cmd_estimate, cmd_identify, cmd_report, cmd_synth, CliError, PipelineConfig};

#[derive(Parser)]
#[command(
    name = "thermid",
    version,
    about = "Identify converter thermal dynamics and estimate power losses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Pipeline configuration (TOML); defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for synthetic noise.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; relative paths in the configuration resolve here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the oracle network and write a calibration dataset.
    Synth,
    /// Fit the temperature-power model on the training split.
    Identify,
    /// Evaluate temperature simulation and power estimation on the test split.
    Estimate,
    /// Evaluate and write rolling RMSE series.
    Report,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.synth.seed = seed;
    }
    if let Some(out) = cli.out {
        config.paths.output_dir = out;
    }
    let dir = &config.paths.output_dir;
    std::fs::create_dir_all(dir).map_err(|source| thermid::Error::Io {
        path: dir.clone(),
        source,
    })?;
    match cli.command {
        Command::Synth => cmd_synth(&config).map(|_| ()),
        Command::Identify => cmd_identify(&config).map(|_| ()),
        Command::Estimate => cmd_estimate(&config).map(|_| ()),
        Command::Report => cmd_report(&config).map(|_| ()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use constraints_cli::config::{Mode, RunConfig};
use constraints_cli::{run, CliError, EXIT_CONFIG};

/// Solves the vacuum constraint equations on the flat torus as described by a TOML config.
#[derive(Debug, Parser)]
#[command(name = "constraints", version)]
struct Args {
    /// Run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the mode named in the config.
    #[arg(long)]
    mode: Option<String>,
    /// Output directory for fields and the report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Debug logging.
    #[arg(long, short)]
    verbose: bool,
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(mode) = &args.mode {
        config.mode = mode.parse::<Mode>()?;
    }
    if let Some(out) = &args.out {
        config.out = Some(out.clone());
    }
    Ok(config)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("CONSTRAINTS_NUM_THREADS") else { return Ok(()) };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Config(format!("CONSTRAINTS_NUM_THREADS = `{value}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.verbose { "debug" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let config = match configure_threads().and_then(|()| load(&args)) {
        Ok(config) => config,
        Err(e) => {
            log::error!("{e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let outcome = run(&config);
    match &outcome.error {
        Some(e) => log::error!("{e}"),
        None => log::info!("{} finished in {:.3} s", config.mode.name(), outcome.report.timing.total_seconds),
    }
    if config.out.is_none() {
        match serde_json::to_string_pretty(&outcome.report) {
            Ok(json) => println!("{json}"),
            Err(e) => log::error!("cannot serialize the report: {e}"),
        }
    }
    ExitCode::from(outcome.exit_code as u8)
}

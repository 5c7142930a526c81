//! `ofdm-sim`: run seeded OFDM Monte-Carlo experiments from JSON configs or
//! built-in presets and emit CSV (plus a `.meta.json` sidecar when writing
//! to a file).
//!
//! Exit codes: 0 success, 1 configuration/usage error, 2 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use ofdm_core::harness::{preset, preset_json, preset_names, run, ExperimentKind, ScenarioConfig};
use ofdm_core::SimError;

/// Environment variable giving the default worker thread count when
/// `--threads` is not passed.
const THREADS_ENV: &str = "OFDM_SIM_THREADS";

#[derive(Parser)]
#[command(name = "ofdm-sim", version, about = "Baseband OFDM experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Power spectral density of the transmitted waveform
    Psd(RunArgs),
    /// PAPR CCDF curves per modulation scheme
    Papr(RunArgs),
    /// BER vs Eb/N0 sweep
    Ber(RunArgs),
    /// SINR/EVM/BER vs carrier frequency offset
    Cfo(RunArgs),
    /// EVM/BER vs cyclic prefix length over a multipath channel
    Cp(RunArgs),
    /// List built-in presets (or dump one with --preset)
    Presets {
        /// Print the JSON of this preset instead of listing names
        #[arg(long)]
        preset: Option<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Path to a JSON scenario config
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Name of a built-in preset (see `ofdm-sim presets`)
    #[arg(long)]
    preset: Option<String>,
    /// Override the config's RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path; defaults to the config's `output`, else stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread count (default: $OFDM_SIM_THREADS, else all cores)
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{err}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

/// Validation problems are exit 1; anything environmental (I/O, thread pool)
/// is exit 2.
fn exit_code_for(err: &SimError) -> u8 {
    match err {
        SimError::Io(_) => 2,
        SimError::InvalidArgument(msg) if msg.starts_with("thread pool") => 2,
        _ => 1,
    }
}

fn dispatch(command: Command) -> Result<(), SimError> {
    match command {
        Command::Psd(args) => execute(ExperimentKind::Psd, args),
        Command::Papr(args) => execute(ExperimentKind::PaprCcdf, args),
        Command::Ber(args) => execute(ExperimentKind::BerSweep, args),
        Command::Cfo(args) => execute(ExperimentKind::CfoSweep, args),
        Command::Cp(args) => execute(ExperimentKind::CpSweep, args),
        Command::Presets { preset: name } => show_presets(name.as_deref()),
    }
}

fn show_presets(name: Option<&str>) -> Result<(), SimError> {
    match name {
        None => {
            for name in preset_names() {
                let kind = preset(name)?.experiment;
                println!("{name:<10} {}", kind.name());
            }
        }
        Some(name) => {
            let json = preset_json(name)
                .ok_or_else(|| SimError::config("preset", format!("unknown preset '{name}'")))?;
            println!("{json}");
        }
    }
    Ok(())
}

fn load_config(kind: ExperimentKind, args: &RunArgs) -> Result<ScenarioConfig, SimError> {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)?;
            ScenarioConfig::from_json(&text)?
        }
        (None, Some(name)) => preset(name)?,
        (None, None) => {
            return Err(SimError::config(
                "config",
                "pass --config <path> or --preset <name>",
            ));
        }
        (Some(_), Some(_)) => unreachable!("clap rejects --config with --preset"),
    };
    if config.experiment != kind {
        return Err(SimError::config(
            "experiment",
            format!(
                "config declares '{}' but the subcommand runs '{}'",
                config.experiment.name(),
                kind.name()
            ),
        ));
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn thread_count(args: &RunArgs) -> Result<Option<usize>, SimError> {
    if let Some(n) = args.threads {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(value) => {
            let n: usize = value.parse().map_err(|_| {
                SimError::config(
                    "threads",
                    format!("{THREADS_ENV}={value:?} is not a thread count"),
                )
            })?;
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn execute(kind: ExperimentKind, args: RunArgs) -> Result<(), SimError> {
    let config = load_config(kind, &args)?;
    let threads = thread_count(&args)?;
    let report = run(&config, threads)?;
    let out = args
        .out
        .clone()
        .or_else(|| config.output.as_ref().map(PathBuf::from));
    match out {
        Some(path) => report.write(&path)?,
        None => print!("{}", report.csv),
    }
    Ok(())
}

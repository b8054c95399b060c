//! Command-line front end: single trials from a config file, named
//! experiments, and property suites.

mod checks;
mod output;
mod presets;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use thiserror::Error;

use se3_consensus::controllers::LawKind;
use se3_consensus::simulator::{run_trial, TrialConfig};
use se3_consensus::so3::Parameterization;

use checks::{CheckOptions, Suite};
use presets::{PresetOptions, DEFAULT_SEED, PRESET_NAMES};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("property failure: {0}")]
    Property(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Property(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "se3-consensus",
    version,
    about = "Consensus and formation control on SE(3)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trial from a TOML config and write trace, events, figure and report files.
    Run {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
    },
    /// Run a named experiment.
    Preset {
        #[arg(long, value_name = "NAME")]
        preset: String,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        /// Trials per Monte-Carlo batch.
        #[arg(long, value_name = "N")]
        trials: Option<usize>,
        /// Worker threads for Monte-Carlo batches; all cores by default.
        #[arg(long, value_name = "N")]
        threads: Option<usize>,
        /// Replaces the preset's horizon in seconds.
        #[arg(long, value_name = "SECONDS")]
        horizon: Option<f64>,
    },
    /// Run property suites and print a JSON summary.
    Check {
        #[arg(value_enum)]
        suite: Suite,
        #[arg(long, value_name = "N", default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Support-inequality sampling radius as a fraction of the injectivity radius.
        #[arg(long, value_name = "F", default_value_t = 0.45)]
        q_factor: f64,
        /// Also write the summary to this file.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

fn help_footer() -> String {
    let laws: Vec<&str> = LawKind::ALL.iter().map(|l| l.name()).collect();
    let params: Vec<&str> = Parameterization::ALL.iter().map(|p| p.name()).collect();
    format!(
        "Law tags: {}\nParameterizations: {}\nPresets: {}\nExit codes: 0 ok, 2 config error, 3 io error, 4 property failure",
        laws.join(", "),
        params.join(", "),
        PRESET_NAMES.join(", ")
    )
}

fn cmd_run(config: PathBuf, out: PathBuf, seed: Option<u64>) -> Result<(), CliError> {
    let text = fs::read_to_string(&config)
        .map_err(|e| CliError::Io(format!("{}: {e}", config.display())))?;
    let mut cfg = TrialConfig::from_toml_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let trace = run_trial(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
    output::write_trial(&out, &cfg, &trace)?;
    println!("{}: {}", trace.outcome.name(), out.display());
    Ok(())
}

fn cmd_preset(name: &str, out: PathBuf, opts: PresetOptions) -> Result<(), CliError> {
    let preset = presets::build(name, &opts)?;
    let report = presets::run(
        &preset,
        &out,
        opts.threads,
        opts.seed.unwrap_or(DEFAULT_SEED),
    )?;
    println!("{}: {}", preset.name, out.display());
    if report.met {
        Ok(())
    } else {
        Err(CliError::Property(format!(
            "{} did not meet its expected outcome",
            preset.name
        )))
    }
}

fn cmd_check(suite: Suite, opts: CheckOptions, out: Option<PathBuf>) -> Result<(), CliError> {
    let summary = checks::run(suite, &opts)?;
    let text = serde_json::to_string_pretty(&summary).expect("summary serialises");
    println!("{text}");
    if let Some(path) = out {
        fs::write(&path, format!("{text}\n"))
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    if summary.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = summary
            .suites
            .iter()
            .filter(|s| !s.passed)
            .map(|s| s.suite)
            .collect();
        Err(CliError::Property(format!(
            "failed suites: {}",
            failed.join(", ")
        )))
    }
}

fn main() -> ExitCode {
    let footer = help_footer();
    let mut command = Cli::command().after_help(footer.clone());
    for sub in ["run", "preset"] {
        command = command.mut_subcommand(sub, |c| c.after_help(footer.clone()));
    }
    let cli = match command
        .try_get_matches()
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Run { config, out, seed } => cmd_run(config, out, seed),
        Command::Preset {
            preset,
            out,
            seed,
            trials,
            threads,
            horizon,
        } => cmd_preset(
            &preset,
            out,
            PresetOptions {
                seed,
                trials,
                threads,
                horizon,
            },
        ),
        Command::Check {
            suite,
            seed,
            q_factor,
            out,
        } => cmd_check(suite, CheckOptions { seed, q_factor }, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

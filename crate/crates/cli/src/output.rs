//! Files written by the commands.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use se3_consensus::analysis::{consensus_report, ConsensusReport, CONSENSUS_THRESHOLD};
use se3_consensus::io::{
    write_events_csv, write_figure_csv, write_json, write_mc_csv, write_trace_csv, FigureFrame,
};
use se3_consensus::simulator::{McSummary, Trace, TrialConfig};

use crate::CliError;

/// Everything `report.json` says about one trial.
#[derive(Serialize)]
pub struct TrialReport<'a> {
    pub config: &'a TrialConfig,
    pub final_time: f64,
    pub report: ConsensusReport,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn csv_err<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_json(value, create(path)?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// `trace.csv`, `events.csv`, `figure.csv` (formation frame),
/// `figure_world.csv` when the trial has targets, and `report.json`.
/// Returns the paths written.
pub fn write_trial(dir: &Path, cfg: &TrialConfig, trace: &Trace) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    let path = dir.join("trace.csv");
    write_trace_csv(trace, create(&path)?).map_err(csv_err(&path))?;
    written.push(path);
    let path = dir.join("events.csv");
    write_events_csv(trace, create(&path)?).map_err(csv_err(&path))?;
    written.push(path);
    let path = dir.join("figure.csv");
    write_figure_csv(trace, FigureFrame::Formation, create(&path)?).map_err(csv_err(&path))?;
    written.push(path);
    if trace.targets.is_some() {
        let path = dir.join("figure_world.csv");
        write_figure_csv(trace, FigureFrame::World, create(&path)?).map_err(csv_err(&path))?;
        written.push(path);
    }
    let report = TrialReport {
        config: cfg,
        final_time: trace.last().t,
        report: consensus_report(trace, CONSENSUS_THRESHOLD),
    };
    let path = dir.join("report.json");
    write_json_file(&path, &report)?;
    written.push(path);
    Ok(written)
}

pub fn write_mc(dir: &Path, summary: &McSummary) -> Result<PathBuf, CliError> {
    ensure_dir(dir)?;
    let path = dir.join("mc.csv");
    write_mc_csv(summary, create(&path)?).map_err(csv_err(&path))?;
    Ok(path)
}

//! Orchestration of the flickering-landmark localization pipeline: run
//! configuration, clock synchronisation, the estimation loop, metrics,
//! reports, plots and parameter sweeps.

pub mod config;
pub mod metrics;
pub mod plot;
pub mod run;
pub mod sweep;
pub mod sync;
pub mod timing;

use std::path::Path;

use thiserror::Error;

use flickerloc::error::DataError;
use flickerloc::kalman::KalmanError;
use flickerloc::ltkf::LtkfError;
use flickerloc::gmm::GmmError;

pub use config::RunConfig;
pub use metrics::{evaluate, EvalOptions, MetricsReport};
pub use run::{run_pipeline, Dataset, RunLogs, RunOutput, TruthData};
pub use timing::{Stage, TimingReport};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("plot error: {0}")]
    Plot(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Ident(#[from] GmmError),
    #[error(transparent)]
    Tracking(#[from] LtkfError),
    #[error(transparent)]
    Filter(#[from] KalmanError),
}

/// Seed for one module derived from the root seed.
pub fn module_seed(root: u64, module: &str) -> u64 {
    // FNV-1a over the module name, mixed into the root seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in module.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
    }
    root.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ h
}

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const TIMING_JSON: &str = "timing.json";
pub const TIMING_TEXT: &str = "timing.txt";
pub const RUN_CONFIG: &str = "run_config.toml";

fn write_text(path: &Path, text: &str) -> Result<(), DataError> {
    std::fs::write(path, text).map_err(|e| DataError::io(path, e))
}

/// Evaluation options matching a run configuration.
pub fn eval_options(cfg: &RunConfig) -> EvalOptions {
    EvalOptions { seed: cfg.seed, paper_literal: cfg.paper_literal, lost_timeout_s: cfg.lost_timeout_s }
}

/// Writes the report in text and JSON form.
pub fn write_report(dir: &Path, report: &MetricsReport) -> Result<(), DataError> {
    write_text(&dir.join(REPORT_TEXT), &report.to_text())?;
    write_text(&dir.join(REPORT_JSON), &report.to_json())
}

/// Writes the timing table in text and JSON form.
pub fn write_timing(dir: &Path, timing: &TimingReport) -> Result<(), DataError> {
    write_text(&dir.join(TIMING_TEXT), &timing.to_text())?;
    write_text(&dir.join(TIMING_JSON), &(serde_json::to_string_pretty(timing).expect("timing serialises") + "\n"))
}

/// Runs the pipeline and writes logs, the effective configuration, timing
/// and, when ground truth is available, the report and plots.
pub fn run_to_dir(cfg: &RunConfig, data: &Dataset, dir: &Path) -> Result<(RunOutput, Option<MetricsReport>), PipelineError> {
    let out = run_pipeline(cfg, data)?;
    out.write(dir)?;
    write_text(&dir.join(RUN_CONFIG), &cfg.to_toml())?;
    write_timing(dir, &out.timing)?;
    let report = match &data.truth {
        Some(truth) => {
            let report = evaluate(&RunLogs::from(&out), truth, eval_options(cfg))?;
            write_report(dir, &report)?;
            plot::write_plots(dir, &RunLogs::from(&out), truth)?;
            Some(report)
        }
        None => None,
    };
    Ok((out, report))
}

//! `flickerloc` command-line tool.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Result};
use clap::{Parser, Subcommand};

use flickerloc::sim::{simulate, ScenarioConfig};
use flickerloc_pipeline::config::InputPaths;
use flickerloc_pipeline::run::{Dataset, RunLogs};
use flickerloc_pipeline::sweep::{parse_range, sweep, write_sweep_csv, SweepParam};
use flickerloc_pipeline::{eval_options, evaluate, plot, run_to_dir, write_report, RunConfig, RUN_CONFIG};

#[derive(Parser)]
#[command(name = "flickerloc", version, about = "Relative localization from flickering landmarks seen by an event camera")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write events, IMU, ground truth and a run configuration.
    Simulate {
        /// Scenario file, or `square` / `hover` for the built-in scenarios.
        scenario: String,
        #[arg(short, long)]
        output: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write events in the binary format instead of CSV.
        #[arg(long)]
        binary: bool,
    },
    /// Run the estimator on a dataset described by a run configuration.
    Run {
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Overrides the root seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Use the literal mixture score and translation kinematics.
        #[arg(long)]
        paper_literal: bool,
    },
    /// Recompute the report and plots of a run directory.
    Eval { dir: PathBuf },
    /// Sweep one scenario parameter and write a CSV of metrics per point.
    Sweep {
        /// `range`, `noise` or `landmarks`.
        param: String,
        /// `start..end` (inclusive, unit step) or `start..end:step`.
        range: String,
        /// Base scenario file, or `square` / `hover`.
        #[arg(long, default_value = "hover")]
        scenario: String,
        /// Overrides the base scenario duration (s).
        #[arg(long)]
        duration: Option<f64>,
        /// Run configuration; defaults are used when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(short, long, default_value = "sweep.csv")]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paper_literal: bool,
    },
}

fn load_scenario(name: &str) -> Result<ScenarioConfig> {
    let path = Path::new(name);
    if !path.exists() {
        match name {
            "square" => return Ok(ScenarioConfig::square()),
            "hover" => return Ok(ScenarioConfig::hover()),
            _ => {}
        }
    }
    Ok(ScenarioConfig::load(path)?)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn cmd_simulate(scenario: &str, out: &Path, seed: Option<u64>, binary: bool) -> Result<()> {
    let mut cfg = load_scenario(scenario)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let sim = simulate(&cfg)?;
    sim.write(out, binary)?;
    write(&out.join("scenario.toml"), &toml::to_string(&cfg)?)?;
    let run = RunConfig {
        seed: cfg.seed,
        inputs: InputPaths { dir: Some(".".into()), ..InputPaths::default() },
        clock_offset_ms: cfg.noise.clock_offset_ms,
        gravity: cfg.noise.gravity,
        ..RunConfig::default()
    };
    write(&out.join("run.toml"), &run.to_toml())?;
    println!(
        "{} events, {} IMU samples, {} truth samples written to {}",
        sim.events.len(),
        sim.imu.len(),
        sim.truth.samples.len(),
        out.display()
    );
    Ok(())
}

fn cmd_run(config: &Path, out: &Path, seed: Option<u64>, paper_literal: bool) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.paper_literal |= paper_literal;
    let data = Dataset::load(&cfg)?;
    let (out_logs, report) = run_to_dir(&cfg, &data, out)?;
    match report {
        Some(r) => print!("{}", r.to_text()),
        None => println!("{} poses logged; no ground truth to evaluate against", out_logs.poses.len()),
    }
    print!("\n{}", out_logs.timing.to_text());
    Ok(())
}

fn cmd_eval(dir: &Path) -> Result<()> {
    let cfg = RunConfig::load(&dir.join(RUN_CONFIG))?;
    let data = Dataset::load(&cfg)?;
    let Some(truth) = &data.truth else {
        bail!("no ground truth found for the run in {}", dir.display());
    };
    let logs = RunLogs::read(dir)?;
    let report = evaluate(&logs, truth, eval_options(&cfg))?;
    write_report(dir, &report)?;
    plot::write_plots(dir, &logs, truth)?;
    print!("{}", report.to_text());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    param: &str,
    range: &str,
    scenario: &str,
    duration: Option<f64>,
    config: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    paper_literal: bool,
) -> Result<()> {
    let param: SweepParam = param.parse()?;
    let values = parse_range(range)?;
    let mut base = load_scenario(scenario)?;
    if let Some(d) = duration {
        base.duration_s = d;
    }
    let mut cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig { clock_offset_ms: base.noise.clock_offset_ms, gravity: base.noise.gravity, ..RunConfig::default() },
    };
    if let Some(s) = seed {
        cfg.seed = s;
        base.seed = s;
    }
    cfg.paper_literal |= paper_literal;
    let rows = sweep(param, &values, &base, &cfg)?;
    write_sweep_csv(out, &rows)?;
    println!("{} points written to {}", rows.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { scenario, output, seed, binary } => cmd_simulate(scenario, output, *seed, *binary),
        Command::Run { config, output, seed, paper_literal } => cmd_run(config, output, *seed, *paper_literal),
        Command::Eval { dir } => cmd_eval(dir),
        Command::Sweep { param, range, scenario, duration, config, output, seed, paper_literal } => {
            cmd_sweep(param, range, scenario, *duration, config.as_deref(), output, *seed, *paper_literal)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

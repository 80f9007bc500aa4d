//! Subcommand bodies behind the CLI: evolve, multi, rulebased, analyze.
//!
//! Exit-code contract: configuration problems map to 1, everything else
//! (I/O, malformed input files, simulation failures) to 2.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::controller::MotorCommand;
use crate::episode::{collective_fitness, run_rule_based, run_single, EpisodeResult};
use crate::evolve::{run_evolution, run_probe, EvolveError, EvolveOutcome};
use crate::io::{self, CsvSink};
use crate::metrics::{cross_correlogram, gain_timeseries, probe_metrics};
use crate::seed::{derive_seed, Purpose};
use crate::trace::{read_trace_csv, write_trace_csv, AgentTrace};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => 1,
            CommandError::Runtime(_) => 2,
        }
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        CommandError::Runtime(e.to_string())
    }
}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        CommandError::Config(e.to_string())
    }
}

impl From<EvolveError> for CommandError {
    fn from(e: EvolveError) -> Self {
        match e {
            EvolveError::Config(c) => CommandError::Config(c.to_string()),
            other => CommandError::Runtime(other.to_string()),
        }
    }
}

/// Summary record written next to episode artifacts.
#[derive(Debug, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub schema_version: u32,
    pub kind: String,
    /// Episode seed actually used (derived from the master seed).
    pub episode_seed: u64,
    pub generation: u32,
    pub collective_fitness: f64,
    pub fitness: Vec<f64>,
    pub config: RunConfig,
}

fn write_summary(path: &Path, summary: &EpisodeSummary) -> Result<(), CommandError> {
    let json = serde_json::to_string_pretty(summary).map_err(CommandError::runtime)?;
    std::fs::write(path, json).map_err(CommandError::runtime)
}

fn mkdir(p: &Path) -> Result<(), CommandError> {
    std::fs::create_dir_all(p).map_err(CommandError::runtime)
}

/// Writes the one-row collective metrics CSV plus the gain time series for
/// an episode trace. Shared verbatim by `cmd_multi`, `cmd_rulebased`, and
/// `cmd_analyze` so inline and offline metrics agree byte for byte.
fn write_episode_metrics(
    out_dir: &Path,
    metrics_name: &str,
    trace: &crate::trace::EpisodeTrace,
    generation: u32,
    cfg: &RunConfig,
) -> Result<(), CommandError> {
    let row = probe_metrics(
        trace,
        generation,
        cfg.mi_bin_width,
        cfg.energy_bins as usize,
    )
    .map_err(CommandError::runtime)?;
    let mut sink = CsvSink::create(
        &out_dir.join(metrics_name),
        &io::probes_header(cfg.energy_bins),
    )
    .map_err(CommandError::runtime)?;
    sink.write_row(&io::probe_row_line(&row))
        .map_err(CommandError::runtime)?;
    let ts = gain_timeseries(trace).map_err(CommandError::runtime)?;
    io::write_gain_timeseries_csv(&out_dir.join("gain_timeseries.csv"), &ts)
        .map_err(CommandError::runtime)?;
    Ok(())
}

pub fn cmd_evolve(
    cfg: &RunConfig,
    out_dir: &Path,
    resume: bool,
) -> Result<EvolveOutcome, CommandError> {
    Ok(run_evolution(cfg, out_dir, resume)?)
}

/// One homogeneous multi-agent episode from a genome checkpoint, plus the
/// full metrics suite.
pub fn cmd_multi(
    cfg: &RunConfig,
    genome_path: &Path,
    out_dir: &Path,
    save_field: bool,
) -> Result<EpisodeResult, CommandError> {
    cfg.validate()?;
    let ckpt = io::read_genome_checkpoint(genome_path).map_err(CommandError::runtime)?;
    mkdir(out_dir)?;
    let episode_seed = derive_seed(cfg.seed, Purpose::Probe, &[ckpt.generation as u64]);
    let result = run_probe(cfg, &ckpt.genome, ckpt.generation).map_err(CommandError::runtime)?;
    write_trace_csv(&out_dir.join("trace.csv"), &result.trace).map_err(CommandError::runtime)?;
    write_episode_metrics(out_dir, "metrics.csv", &result.trace, ckpt.generation, cfg)?;
    write_summary(
        &out_dir.join("summary.json"),
        &EpisodeSummary {
            schema_version: 1,
            kind: "multi".into(),
            episode_seed,
            generation: ckpt.generation,
            collective_fitness: collective_fitness(&result),
            fitness: result.fitness.clone(),
            config: cfg.clone(),
        },
    )?;
    if save_field {
        io::write_field_snapshot(
            &out_dir.join("field.bin"),
            &result.final_field,
            cfg.multi_steps as u64,
        )
        .map_err(CommandError::runtime)?;
    }
    Ok(result)
}

/// Per-step scaled motor series (v, omega) from a trace.
fn motor_series(trace: &AgentTrace) -> (Vec<f64>, Vec<f64>) {
    let mut v = Vec::with_capacity(trace.rows.len());
    let mut omega = Vec::with_capacity(trace.rows.len());
    for r in &trace.rows {
        let cmd = MotorCommand::from_raw(r.raw);
        v.push(cmd.v);
        omega.push(cmd.omega);
    }
    (v, omega)
}

/// Rule-based runs: a single-agent episode always; optionally a clone
/// population, and optionally a behavioral cross-correlogram against an
/// evolved genome on the identical episode seed.
pub fn cmd_rulebased(
    cfg: &RunConfig,
    out_dir: &Path,
    vs_genome: Option<&Path>,
    include_multi: bool,
) -> Result<(), CommandError> {
    cfg.validate()?;
    mkdir(out_dir)?;

    let episode_seed = derive_seed(cfg.seed, Purpose::Evaluate, &[0, 0]);
    let single_cfg = cfg.single_episode(episode_seed, cfg.trace_stride_single);
    let rule_single = run_rule_based(&single_cfg).map_err(CommandError::runtime)?;
    write_trace_csv(&out_dir.join("rule_single_trace.csv"), &rule_single.trace)
        .map_err(CommandError::runtime)?;
    write_summary(
        &out_dir.join("rule_single_summary.json"),
        &EpisodeSummary {
            schema_version: 1,
            kind: "rulebased_single".into(),
            episode_seed,
            generation: 0,
            collective_fitness: collective_fitness(&rule_single),
            fitness: rule_single.fitness.clone(),
            config: cfg.clone(),
        },
    )?;

    if let Some(genome_path) = vs_genome {
        let ckpt = io::read_genome_checkpoint(genome_path).map_err(CommandError::runtime)?;
        // Identical episode seed: same spots, same initial pose.
        let evolved = run_single(&ckpt.genome, &single_cfg).map_err(CommandError::runtime)?;
        write_trace_csv(&out_dir.join("evolved_single_trace.csv"), &evolved.trace)
            .map_err(CommandError::runtime)?;
        let (rv, romega) = motor_series(&rule_single.trace.agents[0]);
        let (ev, eomega) = motor_series(&evolved.trace.agents[0]);
        let window = cfg.correlogram_window as usize;
        let max_lag = cfg.correlogram_max_lag as usize;
        let corr_v = cross_correlogram(&ev, &rv, max_lag, window).map_err(CommandError::runtime)?;
        let corr_omega =
            cross_correlogram(&eomega, &romega, max_lag, window).map_err(CommandError::runtime)?;
        io::write_correlogram_csv(&out_dir.join("correlogram.csv"), &corr_v, &corr_omega)
            .map_err(CommandError::runtime)?;
    }

    if include_multi {
        let multi_seed = derive_seed(cfg.seed, Purpose::Probe, &[0]);
        let multi_cfg = cfg.multi_episode(multi_seed);
        let rule_multi = run_rule_based(&multi_cfg).map_err(CommandError::runtime)?;
        write_trace_csv(&out_dir.join("rule_multi_trace.csv"), &rule_multi.trace)
            .map_err(CommandError::runtime)?;
        write_episode_metrics(out_dir, "rule_multi_metrics.csv", &rule_multi.trace, 0, cfg)?;
        write_summary(
            &out_dir.join("rule_multi_summary.json"),
            &EpisodeSummary {
                schema_version: 1,
                kind: "rulebased_multi".into(),
                episode_seed: multi_seed,
                generation: 0,
                collective_fitness: collective_fitness(&rule_multi),
                fitness: rule_multi.fitness.clone(),
                config: cfg.clone(),
            },
        )?;
    }
    Ok(())
}

/// Recomputes the metrics suite from a stored trace CSV.
pub fn cmd_analyze(
    cfg: &RunConfig,
    trace_path: &Path,
    out_dir: &Path,
    generation: u32,
) -> Result<(), CommandError> {
    cfg.validate()?;
    let trace = read_trace_csv(trace_path, cfg.field_width, cfg.field_height)
        .map_err(CommandError::runtime)?;
    mkdir(out_dir)?;
    write_episode_metrics(out_dir, "metrics.csv", &trace, generation, cfg)
}

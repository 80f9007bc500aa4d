//! Batch front-end: parses run configuration, derives all randomness from
//! the master seed, and drives the evolve / multi / rulebased / analyze
//! subcommands.
//!
//! Exit codes: 0 success, 1 configuration error (bad flags, bad config
//! file, out-of-range values), 2 runtime error (I/O, malformed inputs,
//! simulation failure).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pherovo_core::commands::{cmd_analyze, cmd_evolve, cmd_multi, cmd_rulebased, CommandError};
use pherovo_core::config::RunConfig;

#[derive(Parser)]
#[command(
    name = "pherovo",
    version,
    about = "Deterministic pheromone-field swarm simulator",
    long_about = "Evolves a recurrent-network chemotaxis agent with CMA-ES, clones it into \
homogeneous pheromone-depositing populations, and computes collective-behavior metrics. \
Identical seeds produce byte-identical artifacts at any worker count."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the evolution loop with periodic multi-agent probes.
    Evolve(EvolveArgs),
    /// Run one homogeneous multi-agent episode from a genome checkpoint.
    Multi(MultiArgs),
    /// Run the rule-based agent, optionally against an evolved genome.
    Rulebased(RulebasedArgs),
    /// Recompute the metrics suite from a stored trace CSV.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory for all artifacts.
    #[arg(long, default_value = "run")]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

/// One optional flag per config key; values go through the same parser and
/// validation as the config file.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    field_width: Option<u32>,
    #[arg(long)]
    field_height: Option<u32>,
    #[arg(long)]
    body_radius: Option<f64>,
    #[arg(long)]
    sensor_radius: Option<f64>,
    #[arg(long)]
    n_spots: Option<u32>,
    #[arg(long)]
    spot_amount_min: Option<f64>,
    #[arg(long)]
    spot_amount_max: Option<f64>,
    #[arg(long)]
    spot_sigma_min: Option<f64>,
    #[arg(long)]
    spot_sigma_max: Option<f64>,
    #[arg(long)]
    spot_center_margin: Option<f64>,
    #[arg(long)]
    decay_rate: Option<f64>,
    /// multiplicative | subtractive
    #[arg(long)]
    decay_mode: Option<String>,
    #[arg(long)]
    deposit_value: Option<f64>,
    #[arg(long)]
    single_steps: Option<u32>,
    #[arg(long)]
    multi_steps: Option<u32>,
    #[arg(long)]
    multi_agents: Option<u32>,
    #[arg(long)]
    max_generations: Option<u32>,
    #[arg(long)]
    population: Option<u32>,
    #[arg(long)]
    init_sigma: Option<f64>,
    #[arg(long)]
    eval_every: Option<u32>,
    #[arg(long)]
    trials_per_candidate: Option<u32>,
    #[arg(long)]
    trace_stride_single: Option<u32>,
    #[arg(long)]
    trace_stride_multi: Option<u32>,
    #[arg(long)]
    mi_bin_width: Option<f64>,
    #[arg(long)]
    energy_bins: Option<u32>,
    #[arg(long)]
    correlogram_window: Option<u32>,
    #[arg(long)]
    correlogram_max_lag: Option<u32>,
    /// true | false
    #[arg(long)]
    save_probe_traces: Option<bool>,
    #[arg(long)]
    workers: Option<u32>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), CommandError> {
        let mut set = |key: &str, value: Option<String>| -> Result<(), CommandError> {
            if let Some(v) = value {
                cfg.set_key(key, &v).map_err(CommandError::from)?;
            }
            Ok(())
        };
        set("seed", self.seed.map(|v| v.to_string()))?;
        set("field_width", self.field_width.map(|v| v.to_string()))?;
        set("field_height", self.field_height.map(|v| v.to_string()))?;
        set("body_radius", self.body_radius.map(|v| v.to_string()))?;
        set("sensor_radius", self.sensor_radius.map(|v| v.to_string()))?;
        set("n_spots", self.n_spots.map(|v| v.to_string()))?;
        set(
            "spot_amount_min",
            self.spot_amount_min.map(|v| v.to_string()),
        )?;
        set(
            "spot_amount_max",
            self.spot_amount_max.map(|v| v.to_string()),
        )?;
        set("spot_sigma_min", self.spot_sigma_min.map(|v| v.to_string()))?;
        set("spot_sigma_max", self.spot_sigma_max.map(|v| v.to_string()))?;
        set(
            "spot_center_margin",
            self.spot_center_margin.map(|v| v.to_string()),
        )?;
        set("decay_rate", self.decay_rate.map(|v| v.to_string()))?;
        set("decay_mode", self.decay_mode.clone())?;
        set("deposit_value", self.deposit_value.map(|v| v.to_string()))?;
        set("single_steps", self.single_steps.map(|v| v.to_string()))?;
        set("multi_steps", self.multi_steps.map(|v| v.to_string()))?;
        set("multi_agents", self.multi_agents.map(|v| v.to_string()))?;
        set(
            "max_generations",
            self.max_generations.map(|v| v.to_string()),
        )?;
        set("population", self.population.map(|v| v.to_string()))?;
        set("init_sigma", self.init_sigma.map(|v| v.to_string()))?;
        set("eval_every", self.eval_every.map(|v| v.to_string()))?;
        set(
            "trials_per_candidate",
            self.trials_per_candidate.map(|v| v.to_string()),
        )?;
        set(
            "trace_stride_single",
            self.trace_stride_single.map(|v| v.to_string()),
        )?;
        set(
            "trace_stride_multi",
            self.trace_stride_multi.map(|v| v.to_string()),
        )?;
        set("mi_bin_width", self.mi_bin_width.map(|v| v.to_string()))?;
        set("energy_bins", self.energy_bins.map(|v| v.to_string()))?;
        set(
            "correlogram_window",
            self.correlogram_window.map(|v| v.to_string()),
        )?;
        set(
            "correlogram_max_lag",
            self.correlogram_max_lag.map(|v| v.to_string()),
        )?;
        set(
            "save_probe_traces",
            self.save_probe_traces.map(|v| v.to_string()),
        )?;
        set("workers", self.workers.map(|v| v.to_string()))?;
        Ok(())
    }
}

#[derive(Args)]
struct EvolveArgs {
    #[command(flatten)]
    common: Common,
    /// Continue from the latest optimizer checkpoint in the run directory.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct MultiArgs {
    #[command(flatten)]
    common: Common,
    /// Genome checkpoint file to clone across the population.
    #[arg(long)]
    genome: PathBuf,
    /// Also write the final field as a flat binary snapshot.
    #[arg(long)]
    save_field: bool,
}

#[derive(Args)]
struct RulebasedArgs {
    #[command(flatten)]
    common: Common,
    /// Evolved genome checkpoint to cross-correlate against on the same
    /// episode seed.
    #[arg(long)]
    vs_genome: Option<PathBuf>,
    /// Also run the rule-based clone population.
    #[arg(long)]
    multi: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// Trace CSV to analyze.
    #[arg(long)]
    trace: PathBuf,
    /// Generation label written into the metrics row.
    #[arg(long, default_value_t = 0)]
    generation: u32,
}

fn build_config(common: &Common) -> Result<RunConfig, CommandError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path).map_err(CommandError::from)?,
        None => RunConfig::default(),
    };
    common.overrides.apply(&mut cfg)?;
    cfg.validate().map_err(CommandError::from)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CommandError> {
    match cli.cmd {
        Cmd::Evolve(args) => {
            let cfg = build_config(&args.common)?;
            let outcome = cmd_evolve(&cfg, &args.common.out, args.resume)?;
            println!(
                "evolve: {} generations, {} probes, artifacts in {}",
                outcome.final_generation,
                outcome.probe_generations.len(),
                outcome.out_dir.display()
            );
        }
        Cmd::Multi(args) => {
            let cfg = build_config(&args.common)?;
            let result = cmd_multi(&cfg, &args.genome, &args.common.out, args.save_field)?;
            println!(
                "multi: {} agents, collective fitness {}, artifacts in {}",
                result.fitness.len(),
                pherovo_core::collective_fitness(&result),
                args.common.out.display()
            );
        }
        Cmd::Rulebased(args) => {
            let cfg = build_config(&args.common)?;
            cmd_rulebased(
                &cfg,
                &args.common.out,
                args.vs_genome.as_deref(),
                args.multi,
            )?;
            println!("rulebased: artifacts in {}", args.common.out.display());
        }
        Cmd::Analyze(args) => {
            let cfg = build_config(&args.common)?;
            cmd_analyze(&cfg, &args.trace, &args.common.out, args.generation)?;
            println!("analyze: metrics in {}", args.common.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version print and exit cleanly; anything else is a
            // configuration error.
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

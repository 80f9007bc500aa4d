//! Evolution runs: the ask/evaluate/tell loop over single-agent episodes,
//! with periodic multi-agent probes of the generation's best candidate.
//!
//! All randomness is derived from (master seed, purpose, generation, ...),
//! so a run is resumable from its latest optimizer checkpoint and produces
//! byte-identical artifacts at any worker count. Every candidate within a
//! generation is evaluated on the same episode seed (common random
//! numbers), so ranks compare policies rather than field luck; the episode
//! layout re-randomizes every generation and trial.
//!
//! Run directory layout:
//!
//! ```text
//! out/
//!   config.json                   effective config echo
//!   metrics.csv                   generation,best_fitness,mean_fitness,sigma
//!   probes.csv                    collective metrics per probe generation
//!   scatter.csv                   generation,mi_mean,collective_fitness,area_std
//!   checkpoints/cma_gen<G>.json   optimizer state after generation G
//!   checkpoints/genome_gen<G>.txt best candidate of generation G
//!   traces/probe_gen<G>.csv       probe episode trace (optional)
//! ```

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::cma::{CmaError, CmaEs};
use crate::config::{ConfigError, RunConfig};
use crate::controller::{ControllerError, Genome, GENOME_LEN};
use crate::episode::{run_multi, run_single, EpisodeError, EpisodeResult};
use crate::io::{self, ArtifactError, CsvSink};
use crate::metrics::{probe_metrics, MetricsError};
use crate::seed::{derive_rng, derive_seed, Purpose};
use crate::trace::write_trace_csv;

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Cma(#[from] CmaError),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Trace(#[from] crate::trace::TraceError),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("cannot resume: {0}")]
    Resume(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOutcome {
    pub final_generation: u32,
    /// Generations at which a multi-agent probe ran (this invocation).
    pub probe_generations: Vec<u32>,
    pub out_dir: PathBuf,
}

/// Mean single-episode fitness of one genome over the configured trials.
/// The episode seed depends only on (master seed, generation, trial), so
/// every candidate of a generation faces the same environments.
fn evaluate(cfg: &RunConfig, genome: &Genome, generation: u32) -> Result<f64, EpisodeError> {
    let mut acc = 0.0;
    for trial in 0..cfg.trials_per_candidate {
        let seed = derive_seed(
            cfg.seed,
            Purpose::Evaluate,
            &[generation as u64, trial as u64],
        );
        let episode = cfg.single_episode(seed, 0);
        acc += run_single(genome, &episode)?.fitness[0];
    }
    Ok(acc / cfg.trials_per_candidate as f64)
}

/// Multi-agent probe of one genome at the given generation's derived seed.
pub fn run_probe(
    cfg: &RunConfig,
    genome: &Genome,
    generation: u32,
) -> Result<EpisodeResult, EpisodeError> {
    let seed = derive_seed(cfg.seed, Purpose::Probe, &[generation as u64]);
    run_multi(genome, &cfg.multi_episode(seed))
}

/// Resume must continue the run it is pointed at: every parameter that
/// shapes results has to match the saved echo. Extending max_generations is
/// the point of resuming; workers and probe-trace saving cannot change
/// results.
fn check_resume_config(cfg: &RunConfig, out_dir: &Path) -> Result<(), EvolveError> {
    let path = out_dir.join("config.json");
    let text = std::fs::read_to_string(&path).map_err(|e| {
        EvolveError::Resume(format!("cannot read {}: {e}", path.display()))
    })?;
    let saved: RunConfig = serde_json::from_str(&text).map_err(|e| {
        EvolveError::Resume(format!("cannot parse {}: {e}", path.display()))
    })?;
    let mut comparable = saved;
    comparable.max_generations = cfg.max_generations;
    comparable.workers = cfg.workers;
    comparable.save_probe_traces = cfg.save_probe_traces;
    if &comparable != cfg {
        return Err(EvolveError::Resume(format!(
            "config does not match the saved run in {}",
            out_dir.display()
        )));
    }
    Ok(())
}

pub fn run_evolution(
    cfg: &RunConfig,
    out_dir: &Path,
    resume: bool,
) -> Result<EvolveOutcome, EvolveError> {
    cfg.validate()?;
    if cfg.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers as usize)
            .build()
            .map_err(|e| EvolveError::Pool(e.to_string()))?;
        pool.install(|| evolution_loop(cfg, out_dir, resume))
    } else {
        evolution_loop(cfg, out_dir, resume)
    }
}

fn evolution_loop(
    cfg: &RunConfig,
    out_dir: &Path,
    resume: bool,
) -> Result<EvolveOutcome, EvolveError> {
    let mkdir = |p: &Path| {
        std::fs::create_dir_all(p).map_err(|source| ArtifactError::Io {
            path: p.display().to_string(),
            source,
        })
    };
    mkdir(out_dir)?;
    mkdir(&out_dir.join("checkpoints"))?;
    mkdir(&out_dir.join("traces"))?;
    let metrics_path = out_dir.join("metrics.csv");
    let probes_path = out_dir.join("probes.csv");
    let probes_header = io::probes_header(cfg.energy_bins);

    let (mut es, start_gen, mut metrics, mut probes) = if resume {
        check_resume_config(cfg, out_dir)?;
        let (gen, ckpt_path) = io::latest_cma_checkpoint(out_dir)?.ok_or_else(|| {
            EvolveError::Resume(format!("no checkpoint under {}", out_dir.display()))
        })?;
        let ckpt = io::read_cma_checkpoint(&ckpt_path)?;
        let metrics = CsvSink::reopen_truncated(&metrics_path, io::METRICS_HEADER, gen)?;
        let probes = CsvSink::reopen_truncated(&probes_path, &probes_header, gen)?;
        (ckpt.state, gen + 1, metrics, probes)
    } else {
        let config_json = out_dir.join("config.json");
        std::fs::write(&config_json, cfg.to_json()).map_err(|source| ArtifactError::Io {
            path: config_json.display().to_string(),
            source,
        })?;
        let es = CmaEs::new(&[0.0; GENOME_LEN], cfg.init_sigma, cfg.population as usize)?;
        io::write_cma_checkpoint(&io::cma_checkpoint_path(out_dir, 0), &es)?;
        let metrics = CsvSink::create(&metrics_path, io::METRICS_HEADER)?;
        let probes = CsvSink::create(&probes_path, &probes_header)?;
        (es, 1, metrics, probes)
    };

    let mut probe_generations = Vec::new();
    for generation in start_gen..=cfg.max_generations {
        let mut rng = derive_rng(cfg.seed, Purpose::Sample, &[generation as u64]);
        let candidates = es.ask(&mut rng)?;
        let genomes: Vec<Genome> = candidates
            .iter()
            .map(|c| Genome::new(c.clone()))
            .collect::<Result<_, _>>()?;

        let fitness: Vec<f64> = genomes
            .par_iter()
            .map(|g| evaluate(cfg, g, generation))
            .collect::<Result<_, _>>()?;

        let mut best_idx = 0;
        for (i, f) in fitness.iter().enumerate() {
            if *f > fitness[best_idx] {
                best_idx = i;
            }
        }
        let best_fitness = fitness[best_idx];
        let mean_fitness = fitness.iter().sum::<f64>() / fitness.len() as f64;

        es.tell(&candidates, &fitness)?;
        metrics.write_row(&io::metrics_row_line(
            generation,
            best_fitness,
            mean_fitness,
            es.sigma(),
        ))?;

        if generation % cfg.eval_every == 0 {
            let best = &genomes[best_idx];
            let result = run_probe(cfg, best, generation)?;
            let row = probe_metrics(
                &result.trace,
                generation,
                cfg.mi_bin_width,
                cfg.energy_bins as usize,
            )?;
            probes.write_row(&io::probe_row_line(&row))?;
            if cfg.save_probe_traces {
                write_trace_csv(&io::probe_trace_path(out_dir, generation), &result.trace)?;
            }
            // Checkpoints land after the probe artifacts: a crash anywhere
            // in between resumes from the previous checkpoint and rewrites
            // this generation identically, so no row is ever lost.
            io::write_genome_checkpoint(
                &io::genome_checkpoint_path(out_dir, generation),
                generation,
                best_fitness,
                best,
            )?;
            io::write_cma_checkpoint(&io::cma_checkpoint_path(out_dir, generation), &es)?;
            probe_generations.push(generation);
        }
    }

    // A trailing checkpoint when the run does not end on a probe boundary,
    // so resume always has the final state.
    if !cfg.max_generations.is_multiple_of(cfg.eval_every) && cfg.max_generations >= start_gen {
        io::write_cma_checkpoint(&io::cma_checkpoint_path(out_dir, cfg.max_generations), &es)?;
    }

    io::write_scatter_from_probes(&probes_path, &out_dir.join("scatter.csv"))?;
    Ok(EvolveOutcome {
        final_generation: cfg.max_generations,
        probe_generations,
        out_dir: out_dir.to_path_buf(),
    })
}

//! Run-directory artifact formats.
//!
//! - Genome checkpoints: line-based text, weights printed with 17
//!   significant digits so parsing reproduces the exact bits.
//! - Optimizer checkpoints: JSON (serde_json round-trips f64 exactly with
//!   the float_roundtrip feature).
//! - Metrics CSVs: floats in shortest round-trip form, one flushed line per
//!   row so interrupted runs keep every completed row.
//! - Field snapshots: flat binary, header of three little-endian u64
//!   (width, height, step) followed by width*height little-endian f64
//!   clamped amounts, row-major.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::cma::CmaEs;
use crate::controller::{Genome, GENOME_LEN};
use crate::field::PheromoneField;
use crate::metrics::{Correlogram, MetricsRow};

pub const METRICS_HEADER: &str = "generation,best_fitness,mean_fitness,sigma";
pub const SCATTER_HEADER: &str = "generation,mi_mean,collective_fitness,area_std";
pub const CORRELOGRAM_HEADER: &str = "window,lag,r_v,r_omega";
pub const GAIN_TS_HEADER: &str = "step,mean_gain";
const GENOME_MAGIC: &str = "genome_checkpoint_v1";
const CMA_SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: bad {field}: '{value}'")]
    Parse {
        path: String,
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("{path}: checkpoint JSON: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {reason}")]
    Malformed { path: String, reason: String },
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.display().to_string(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Genome checkpoints
// ---------------------------------------------------------------------------

/// Writes a genome checkpoint:
///
/// ```text
/// genome_checkpoint_v1
/// generation <n>
/// fitness <f>
/// weights 82
/// <82 weight lines>
/// ```
pub fn write_genome_checkpoint(
    path: &Path,
    generation: u32,
    fitness: f64,
    genome: &Genome,
) -> Result<(), ArtifactError> {
    let mut text = format!(
        "{GENOME_MAGIC}\ngeneration {generation}\nfitness {fitness:.17e}\nweights {GENOME_LEN}\n"
    );
    for w in genome.weights() {
        text.push_str(&format!("{w:.17e}\n"));
    }
    write_atomically(path, text.as_bytes())
}

/// Checkpoints are resume points; write-then-rename keeps a crash from
/// leaving a torn file behind.
fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), ArtifactError> {
    let err = io_err(path);
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(&err)?;
    std::fs::rename(&tmp, path).map_err(&err)
}

#[derive(Debug)]
pub struct GenomeCheckpoint {
    pub generation: u32,
    pub fitness: f64,
    pub genome: Genome,
}

pub fn read_genome_checkpoint(path: &Path) -> Result<GenomeCheckpoint, ArtifactError> {
    let err = io_err(path);
    let display = path.display().to_string();
    let parse_err = |line: usize, field: &'static str, value: &str| ArtifactError::Parse {
        path: display.clone(),
        line,
        field,
        value: value.to_string(),
    };
    let file = std::fs::File::open(path).map_err(&err)?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let mut next = |field: &'static str| -> Result<(usize, String), ArtifactError> {
        match lines.next() {
            Some((idx, Ok(l))) => Ok((idx + 1, l)),
            Some((idx, Err(_))) => Err(parse_err(idx + 1, field, "<unreadable>")),
            None => Err(parse_err(0, field, "<missing line>")),
        }
    };

    let (line, magic) = next("magic")?;
    if magic.trim() != GENOME_MAGIC {
        return Err(parse_err(line, "magic", &magic));
    }
    let (line, gen_line) = next("generation")?;
    let generation = gen_line
        .strip_prefix("generation ")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| parse_err(line, "generation", &gen_line))?;
    let (line, fit_line) = next("fitness")?;
    let fitness = fit_line
        .strip_prefix("fitness ")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| parse_err(line, "fitness", &fit_line))?;
    let (line, count_line) = next("weights")?;
    let count: usize = count_line
        .strip_prefix("weights ")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| parse_err(line, "weights", &count_line))?;
    if count != GENOME_LEN {
        return Err(parse_err(line, "weights", &count_line));
    }
    let mut weights = Vec::with_capacity(GENOME_LEN);
    for _ in 0..GENOME_LEN {
        let (line, w_line) = next("weight")?;
        let w: f64 = w_line
            .trim()
            .parse()
            .map_err(|_| parse_err(line, "weight", &w_line))?;
        weights.push(w);
    }
    let genome = Genome::new(weights).map_err(|e| ArtifactError::Malformed {
        path: display.clone(),
        reason: e.to_string(),
    })?;
    Ok(GenomeCheckpoint {
        generation,
        fitness,
        genome,
    })
}

// ---------------------------------------------------------------------------
// Optimizer checkpoints
// ---------------------------------------------------------------------------

#[derive(serde::Serialize, serde::Deserialize)]
pub struct CmaCheckpoint {
    pub schema_version: u32,
    pub generation: u32,
    pub state: CmaEs,
}

pub fn write_cma_checkpoint(path: &Path, state: &CmaEs) -> Result<(), ArtifactError> {
    let ckpt = CmaCheckpoint {
        schema_version: CMA_SCHEMA,
        generation: state.generation(),
        state: state.clone(),
    };
    let json = serde_json::to_string(&ckpt).map_err(|source| ArtifactError::Json {
        path: path.display().to_string(),
        source,
    })?;
    write_atomically(path, json.as_bytes())
}

pub fn read_cma_checkpoint(path: &Path) -> Result<CmaCheckpoint, ArtifactError> {
    let text = std::fs::read_to_string(path).map_err(&io_err(path))?;
    let ckpt: CmaCheckpoint =
        serde_json::from_str(&text).map_err(|source| ArtifactError::Json {
            path: path.display().to_string(),
            source,
        })?;
    if ckpt.schema_version != CMA_SCHEMA {
        return Err(ArtifactError::Malformed {
            path: path.display().to_string(),
            reason: format!("unsupported schema version {}", ckpt.schema_version),
        });
    }
    Ok(ckpt)
}

// ---------------------------------------------------------------------------
// Run-directory layout
// ---------------------------------------------------------------------------

pub fn cma_checkpoint_path(dir: &Path, generation: u32) -> PathBuf {
    dir.join("checkpoints")
        .join(format!("cma_gen{generation:06}.json"))
}

pub fn genome_checkpoint_path(dir: &Path, generation: u32) -> PathBuf {
    dir.join("checkpoints")
        .join(format!("genome_gen{generation:06}.txt"))
}

pub fn probe_trace_path(dir: &Path, generation: u32) -> PathBuf {
    dir.join("traces")
        .join(format!("probe_gen{generation:06}.csv"))
}

/// Newest optimizer checkpoint in a run directory, by generation.
pub fn latest_cma_checkpoint(dir: &Path) -> Result<Option<(u32, PathBuf)>, ArtifactError> {
    let ckpt_dir = dir.join("checkpoints");
    if !ckpt_dir.exists() {
        return Ok(None);
    }
    let mut best: Option<(u32, PathBuf)> = None;
    for entry in std::fs::read_dir(&ckpt_dir).map_err(&io_err(&ckpt_dir))? {
        let entry = entry.map_err(&io_err(&ckpt_dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(gen) = name
            .strip_prefix("cma_gen")
            .and_then(|s| s.strip_suffix(".json"))
            .and_then(|s| s.parse::<u32>().ok())
        {
            if best.as_ref().is_none_or(|(g, _)| gen > *g) {
                best = Some((gen, entry.path()));
            }
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// CSV writers
// ---------------------------------------------------------------------------

/// Line-buffered CSV sink that writes the header on creation and flushes
/// after every row, so interrupted runs keep all completed rows.
pub struct CsvSink {
    path: PathBuf,
    out: BufWriter<std::fs::File>,
}

impl CsvSink {
    pub fn create(path: &Path, header: &str) -> Result<Self, ArtifactError> {
        let err = io_err(path);
        let mut out = BufWriter::new(std::fs::File::create(path).map_err(&err)?);
        writeln!(out, "{header}").map_err(&err)?;
        out.flush().map_err(&err)?;
        Ok(CsvSink {
            path: path.to_path_buf(),
            out,
        })
    }

    /// Reopens an existing CSV for appending, first dropping every data row
    /// whose leading integer field exceeds `max_leading`. Used on resume.
    pub fn reopen_truncated(
        path: &Path,
        header: &str,
        max_leading: u32,
    ) -> Result<Self, ArtifactError> {
        let err = io_err(path);
        let mut kept = format!("{header}\n");
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(&err)?;
            for line in text.lines().skip(1) {
                let lead: Option<u32> = line.split(',').next().and_then(|v| v.parse().ok());
                match lead {
                    Some(g) if g <= max_leading => {
                        kept.push_str(line);
                        kept.push('\n');
                    }
                    _ => {}
                }
            }
        }
        std::fs::write(path, &kept).map_err(&err)?;
        let out = BufWriter::new(
            std::fs::OpenOptions::new()
                .append(true)
                .open(path)
                .map_err(&err)?,
        );
        Ok(CsvSink {
            path: path.to_path_buf(),
            out,
        })
    }

    pub fn write_row(&mut self, row: &str) -> Result<(), ArtifactError> {
        let err = io_err(&self.path);
        writeln!(self.out, "{row}").map_err(&err)?;
        self.out.flush().map_err(&err)
    }
}

/// `generation,best_fitness,mean_fitness,sigma` row.
pub fn metrics_row_line(generation: u32, best: f64, mean: f64, sigma: f64) -> String {
    format!("{generation},{best},{mean},{sigma}")
}

pub fn probes_header(energy_bins: u32) -> String {
    let mut h =
        String::from("generation,collective_fitness,gain_std,area_std,mi_mean,cond_entropy_mean");
    for k in 0..energy_bins {
        h.push_str(&format!(",e{k:02}"));
    }
    h
}

pub fn probe_row_line(row: &MetricsRow) -> String {
    let mut line = format!(
        "{},{},{},{},{},{}",
        row.generation,
        row.collective_fitness,
        row.gain_std,
        row.area_std,
        row.mi_mean,
        row.cond_entropy_mean
    );
    for c in &row.energy_counts {
        line.push_str(&format!(",{c}"));
    }
    line
}

/// Rewrites scatter.csv (generation, mi_mean, collective_fitness, area_std)
/// from the probes file.
pub fn write_scatter_from_probes(
    probes_path: &Path,
    scatter_path: &Path,
) -> Result<(), ArtifactError> {
    let err = io_err(probes_path);
    let text = std::fs::read_to_string(probes_path).map_err(&err)?;
    let mut out = String::from(SCATTER_HEADER);
    out.push('\n');
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() >= 6 {
            out.push_str(&format!("{},{},{},{}\n", f[0], f[4], f[1], f[3]));
        }
    }
    std::fs::write(scatter_path, out).map_err(&io_err(scatter_path))
}

/// Writes the per-channel correlograms side by side:
/// `window,lag,r_v,r_omega`. Degenerate windows report r = 0.
pub fn write_correlogram_csv(
    path: &Path,
    v: &Correlogram,
    omega: &Correlogram,
) -> Result<(), ArtifactError> {
    if v.cells.len() != omega.cells.len() {
        return Err(ArtifactError::Malformed {
            path: path.display().to_string(),
            reason: format!(
                "channel cell counts differ: {} vs {}",
                v.cells.len(),
                omega.cells.len()
            ),
        });
    }
    let err = io_err(path);
    let mut out = BufWriter::new(std::fs::File::create(path).map_err(&err)?);
    writeln!(out, "{CORRELOGRAM_HEADER}").map_err(&err)?;
    for (cv, co) in v.cells.iter().zip(omega.cells.iter()) {
        debug_assert_eq!((cv.start, cv.lag), (co.start, co.lag));
        writeln!(out, "{},{},{},{}", cv.start, cv.lag, cv.r, co.r).map_err(&err)?;
    }
    out.flush().map_err(&err)
}

pub fn write_gain_timeseries_csv(path: &Path, series: &[(u32, f64)]) -> Result<(), ArtifactError> {
    let err = io_err(path);
    let mut out = BufWriter::new(std::fs::File::create(path).map_err(&err)?);
    writeln!(out, "{GAIN_TS_HEADER}").map_err(&err)?;
    for (step, gain) in series {
        writeln!(out, "{step},{gain}").map_err(&err)?;
    }
    out.flush().map_err(&err)
}

// ---------------------------------------------------------------------------
// Field snapshots
// ---------------------------------------------------------------------------

pub fn write_field_snapshot(
    path: &Path,
    field: &PheromoneField,
    step: u64,
) -> Result<(), ArtifactError> {
    let err = io_err(path);
    let mut out = BufWriter::new(std::fs::File::create(path).map_err(&err)?);
    out.write_all(&(field.width() as u64).to_le_bytes())
        .map_err(&err)?;
    out.write_all(&(field.height() as u64).to_le_bytes())
        .map_err(&err)?;
    out.write_all(&step.to_le_bytes()).map_err(&err)?;
    for v in field.snapshot() {
        out.write_all(&v.to_le_bytes()).map_err(&err)?;
    }
    out.flush().map_err(&err)
}

pub struct FieldSnapshot {
    pub width: u64,
    pub height: u64,
    pub step: u64,
    /// Clamped amounts, row-major.
    pub amounts: Vec<f64>,
}

pub fn read_field_snapshot(path: &Path) -> Result<FieldSnapshot, ArtifactError> {
    let err = io_err(path);
    let mut file = std::fs::File::open(path).map_err(&err)?;
    let mut head = [0u8; 24];
    file.read_exact(&mut head).map_err(&err)?;
    let width = u64::from_le_bytes(head[0..8].try_into().unwrap());
    let height = u64::from_le_bytes(head[8..16].try_into().unwrap());
    let step = u64::from_le_bytes(head[16..24].try_into().unwrap());
    let n = (width * height) as usize;
    let mut body = vec![0u8; n * 8];
    file.read_exact(&mut body).map_err(&err)?;
    let amounts = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(FieldSnapshot {
        width,
        height,
        step,
        amounts,
    })
}

//! Collective-behavior metrics over episode traces.
//!
//! Sensor/motor series are discretized into fixed-width bins over [0,1] and
//! treated as tuple symbols; entropies are plug-in (maximum-likelihood)
//! estimates over sparse joint frequency tables in bits. That keeps the
//! decomposition H(O) = MI(I;O) + H(O|I) exact up to float roundoff. No
//! small-sample bias correction is applied, so values are comparable across
//! runs of this simulator but not across estimators.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::space::min_image;
use crate::trace::{AgentTrace, EpisodeTrace};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("value {value} at row {row} is outside [0,1]")]
    OutOfRange { row: usize, value: f64 },
    #[error("bin width must be in (0, 1], got {0}")]
    BadBinWidth(f64),
    #[error("series too short: {len} rows (need at least {min})")]
    TooShort { len: usize, min: usize },
    #[error("series lengths differ: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("zero variance in correlation input")]
    ZeroVariance,
    #[error("window {window} with max lag {max_lag} does not fit series of length {len}")]
    BadWindow {
        window: usize,
        max_lag: usize,
        len: usize,
    },
    #[error("traces are not aligned on the same logged steps")]
    Misaligned,
    #[error("no agent traces")]
    Empty,
}

/// Symbolized multivariate time series: one integer tuple per step.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedSeries {
    pub symbols: Vec<Vec<u16>>,
    pub n_bins: u16,
}

/// Plug-in information decomposition, in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoDecomposition {
    pub mi: f64,
    pub cond_entropy: f64,
    pub out_entropy: f64,
}

/// Maps values in [0,1] to bin indices: floor(v / width), top edge clamped
/// into the last bin.
pub fn discretize(rows: &[Vec<f64>], bin_width: f64) -> Result<DiscretizedSeries, MetricsError> {
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return Err(MetricsError::BadBinWidth(bin_width));
    }
    let n_bins = (1.0 / bin_width).round() as u16;
    let top = n_bins - 1;
    let mut symbols = Vec::with_capacity(rows.len());
    for (row_idx, row) in rows.iter().enumerate() {
        let mut tuple = Vec::with_capacity(row.len());
        for &v in row {
            if !(0.0..=1.0).contains(&v) {
                return Err(MetricsError::OutOfRange {
                    row: row_idx,
                    value: v,
                });
            }
            tuple.push(((v / bin_width).floor() as u16).min(top));
        }
        symbols.push(tuple);
    }
    Ok(DiscretizedSeries { symbols, n_bins })
}

fn plugin_entropy<K: Ord>(counts: &BTreeMap<K, u32>, n: usize) -> f64 {
    // H = log2(n) - sum(c * log2(c)) / n; deterministic iteration order.
    let n = n as f64;
    let mut acc = 0.0;
    for &c in counts.values() {
        let c = c as f64;
        acc += c * c.log2();
    }
    n.log2() - acc / n
}

/// Plug-in MI, conditional entropy, and output entropy of two aligned
/// discretized series, treating each step's tuple as one joint symbol.
pub fn info_decomposition(
    inputs: &DiscretizedSeries,
    outputs: &DiscretizedSeries,
) -> Result<InfoDecomposition, MetricsError> {
    let n = inputs.symbols.len();
    if n != outputs.symbols.len() {
        return Err(MetricsError::LengthMismatch {
            a: n,
            b: outputs.symbols.len(),
        });
    }
    if n < 2 {
        return Err(MetricsError::TooShort { len: n, min: 2 });
    }
    let mut in_counts: BTreeMap<&[u16], u32> = BTreeMap::new();
    let mut out_counts: BTreeMap<&[u16], u32> = BTreeMap::new();
    let mut joint_counts: BTreeMap<(&[u16], &[u16]), u32> = BTreeMap::new();
    for (i, o) in inputs.symbols.iter().zip(outputs.symbols.iter()) {
        *in_counts.entry(i).or_insert(0) += 1;
        *out_counts.entry(o).or_insert(0) += 1;
        *joint_counts.entry((i, o)).or_insert(0) += 1;
    }
    let h_in = plugin_entropy(&in_counts, n);
    let h_out = plugin_entropy(&out_counts, n);
    let h_joint = plugin_entropy(&joint_counts, n);
    Ok(InfoDecomposition {
        mi: (h_in + h_out - h_joint).max(0.0),
        cond_entropy: (h_joint - h_in).max(0.0),
        out_entropy: h_out.max(0.0),
    })
}

/// Decomposition for one agent: 6 sensor channels against the 2 raw motor
/// channels of its trace.
pub fn agent_info(trace: &AgentTrace, bin_width: f64) -> Result<InfoDecomposition, MetricsError> {
    let sensors: Vec<Vec<f64>> = trace.rows.iter().map(|r| r.sensors.to_vec()).collect();
    let motors: Vec<Vec<f64>> = trace.rows.iter().map(|r| r.raw.to_vec()).collect();
    info_decomposition(
        &discretize(&sensors, bin_width)?,
        &discretize(&motors, bin_width)?,
    )
}

/// Arithmetic mean of the per-agent decompositions.
pub fn population_info(
    agents: &[AgentTrace],
    bin_width: f64,
) -> Result<InfoDecomposition, MetricsError> {
    if agents.is_empty() {
        return Err(MetricsError::Empty);
    }
    let per_agent: Vec<Result<InfoDecomposition, MetricsError>> = agents
        .par_iter()
        .map(|t| agent_info(t, bin_width))
        .collect();
    let mut mi = 0.0;
    let mut cond = 0.0;
    let mut out = 0.0;
    for r in per_agent {
        let d = r?;
        mi += d.mi;
        cond += d.cond_entropy;
        out += d.out_entropy;
    }
    let n = agents.len() as f64;
    Ok(InfoDecomposition {
        mi: mi / n,
        cond_entropy: cond / n,
        out_entropy: out / n,
    })
}

/// Per-logged-step squared displacement, wrap-aware, clamped into [0,1]
/// against float slop at exactly unit speed.
pub fn kinetic_energy(trace: &AgentTrace, width: f64, height: f64) -> Vec<f64> {
    trace
        .rows
        .iter()
        .map(|r| {
            let dx = min_image(r.x - r.prev_x, width);
            let dy = min_image(r.y - r.prev_y, height);
            (dx * dx + dy * dy).min(1.0)
        })
        .collect()
}

/// Pooled histogram of per-step kinetic energies over uniform bins on [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyHistogram {
    pub generation: u32,
    pub counts: Vec<u64>,
}

impl EnergyHistogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    /// Lower edge of bin k.
    pub fn edge(&self, k: usize) -> f64 {
        k as f64 / self.counts.len() as f64
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn energy_histogram(
    trace: &EpisodeTrace,
    generation: u32,
    n_bins: usize,
) -> Result<EnergyHistogram, MetricsError> {
    if trace.agents.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (w, h) = (trace.width as f64, trace.height as f64);
    let mut counts = vec![0u64; n_bins];
    for agent in &trace.agents {
        for e in kinetic_energy(agent, w, h) {
            let bin = ((e * n_bins as f64).floor() as usize).min(n_bins - 1);
            counts[bin] += 1;
        }
    }
    Ok(EnergyHistogram { generation, counts })
}

/// Number of distinct grid cells the agent's center visited over the
/// window, counting the window's starting cell (the first row's previous
/// position).
pub fn movement_area(trace: &AgentTrace) -> usize {
    let mut cells = std::collections::HashSet::new();
    if let Some(first) = trace.rows.first() {
        cells.insert((first.prev_x.floor() as i64, first.prev_y.floor() as i64));
    }
    for r in &trace.rows {
        cells.insert((r.x.floor() as i64, r.y.floor() as i64));
    }
    cells.len()
}

/// Mean and population standard deviation (divide by N).
pub fn dispersion(values: &[f64]) -> Result<(f64, f64), MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Mean gain across agents at each logged step. All traces must share the
/// same step labels.
pub fn gain_timeseries(trace: &EpisodeTrace) -> Result<Vec<(u32, f64)>, MetricsError> {
    let first = trace.agents.first().ok_or(MetricsError::Empty)?;
    let steps: Vec<u32> = first.rows.iter().map(|r| r.step).collect();
    for a in &trace.agents {
        if a.rows.len() != steps.len() || a.rows.iter().zip(steps.iter()).any(|(r, s)| r.step != *s)
        {
            return Err(MetricsError::Misaligned);
        }
    }
    let n = trace.agents.len() as f64;
    Ok(steps
        .iter()
        .enumerate()
        .map(|(i, &step)| {
            let sum: f64 = trace.agents.iter().map(|a| a.rows[i].gain).sum();
            (step, sum / n)
        })
        .collect())
}

/// Pearson correlation coefficient, clamped into [-1, 1].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch {
            a: x.len(),
            b: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(MetricsError::TooShort {
            len: x.len(),
            min: 2,
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y.iter()) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok((cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrCell {
    /// Window start index into the series.
    pub start: usize,
    /// Shift applied to series B: cell pairs A[t] with B[t + lag].
    pub lag: i64,
    pub r: f64,
    /// True when either windowed segment had zero variance; r is 0 then.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correlogram {
    pub window: usize,
    pub max_lag: usize,
    pub cells: Vec<CorrCell>,
}

/// Windowed cross-correlation: for every window start and every lag whose
/// shifted segment stays in range, the Pearson correlation between
/// A[w..w+window] and B[w+lag..w+lag+window]. Out-of-range segments are
/// skipped.
pub fn cross_correlogram(
    a: &[f64],
    b: &[f64],
    max_lag: usize,
    window: usize,
) -> Result<Correlogram, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    if window < 2 || window > a.len() {
        return Err(MetricsError::BadWindow {
            window,
            max_lag,
            len: a.len(),
        });
    }
    let len = a.len() as i64;
    let win = window as i64;
    let mut cells = Vec::new();
    for start in 0..=(a.len() - window) {
        for lag in -(max_lag as i64)..=(max_lag as i64) {
            let b_start = start as i64 + lag;
            if b_start < 0 || b_start + win > len {
                continue;
            }
            let seg_a = &a[start..start + window];
            let seg_b = &b[b_start as usize..b_start as usize + window];
            let cell = match pearson(seg_a, seg_b) {
                Ok(r) => CorrCell {
                    start,
                    lag,
                    r,
                    degenerate: false,
                },
                Err(MetricsError::ZeroVariance) => CorrCell {
                    start,
                    lag,
                    r: 0.0,
                    degenerate: true,
                },
                Err(e) => return Err(e),
            };
            cells.push(cell);
        }
    }
    Ok(Correlogram {
        window,
        max_lag,
        cells,
    })
}

/// One probe row of the collective-behavior metrics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub generation: u32,
    pub collective_fitness: f64,
    pub gain_std: f64,
    pub area_std: f64,
    pub mi_mean: f64,
    pub cond_entropy_mean: f64,
    pub energy_counts: Vec<u64>,
}

/// Assembles the full metrics row from a trace. Used identically for
/// inline probe metrics and for offline re-analysis so the two paths agree
/// bit for bit.
pub fn probe_metrics(
    trace: &EpisodeTrace,
    generation: u32,
    bin_width: f64,
    n_energy_bins: usize,
) -> Result<MetricsRow, MetricsError> {
    if trace.agents.is_empty() {
        return Err(MetricsError::Empty);
    }
    let gains: Vec<f64> = trace.agents.iter().map(|a| a.gain_sum()).collect();
    let areas: Vec<f64> = trace
        .agents
        .iter()
        .map(|a| movement_area(a) as f64)
        .collect();
    let (gain_mean, gain_std) = dispersion(&gains)?;
    let (_, area_std) = dispersion(&areas)?;
    let info = population_info(&trace.agents, bin_width)?;
    let hist = energy_histogram(trace, generation, n_energy_bins)?;
    Ok(MetricsRow {
        generation,
        collective_fitness: gain_mean,
        gain_std,
        area_std,
        mi_mean: info.mi,
        cond_entropy_mean: info.cond_entropy,
        energy_counts: hist.counts,
    })
}

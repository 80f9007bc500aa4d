//! Run configuration: every simulation parameter with its default, a flat
//! `key = value` text format, and a JSON echo for run provenance.
//!
//! Unknown keys and out-of-range values are rejected at parse time; the
//! effective config is echoed into each run directory so a run can be
//! reproduced from its artifacts alone.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episode::{EpisodeConfig, Phase};
use crate::field::{DecayMode, SpotRanges};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected 'key = value', got '{text}'")]
    Syntax { line: usize, text: String },
    #[error("unknown config key '{key}'")]
    UnknownKey { key: String },
    #[error("config key '{key}': cannot parse '{value}'")]
    BadValue { key: String, value: String },
    #[error("invalid config: {0}")]
    OutOfBounds(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub field_width: u32,
    pub field_height: u32,
    pub body_radius: f64,
    pub sensor_radius: f64,
    pub n_spots: u32,
    pub spot_amount_min: f64,
    pub spot_amount_max: f64,
    pub spot_sigma_min: f64,
    pub spot_sigma_max: f64,
    pub spot_center_margin: f64,
    pub decay_rate: f64,
    pub decay_mode: DecayMode,
    pub deposit_value: f64,
    pub single_steps: u32,
    pub multi_steps: u32,
    pub multi_agents: u32,
    pub max_generations: u32,
    pub population: u32,
    pub init_sigma: f64,
    pub eval_every: u32,
    pub trials_per_candidate: u32,
    pub trace_stride_single: u32,
    pub trace_stride_multi: u32,
    pub mi_bin_width: f64,
    pub energy_bins: u32,
    pub correlogram_window: u32,
    pub correlogram_max_lag: u32,
    pub save_probe_traces: bool,
    /// Worker threads for parallel evaluation; 0 picks the rayon default.
    pub workers: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            field_width: 600,
            field_height: 600,
            body_radius: 20.0,
            sensor_radius: 2.0,
            n_spots: 5,
            spot_amount_min: 0.2,
            spot_amount_max: 1.0,
            spot_sigma_min: 50.0,
            spot_sigma_max: 100.0,
            spot_center_margin: 2.0,
            decay_rate: 0.001,
            decay_mode: DecayMode::Multiplicative,
            deposit_value: 1.0,
            single_steps: 1000,
            multi_steps: 5000,
            multi_agents: 1024,
            max_generations: 2000,
            population: 100,
            init_sigma: 0.1,
            eval_every: 10,
            trials_per_candidate: 1,
            trace_stride_single: 1,
            trace_stride_multi: 5,
            mi_bin_width: 0.01,
            energy_bins: 20,
            correlogram_window: 100,
            correlogram_max_lag: 20,
            save_probe_traces: true,
            workers: 0,
        }
    }
}

impl RunConfig {
    /// Sets one field from its text key. The single entry point for both
    /// the file parser and CLI overrides, so unknown keys fail everywhere.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        macro_rules! parse {
            ($field:ident) => {
                self.$field = value.trim().parse().map_err(|_| bad())?
            };
        }
        match key {
            "seed" => parse!(seed),
            "field_width" => parse!(field_width),
            "field_height" => parse!(field_height),
            "body_radius" => parse!(body_radius),
            "sensor_radius" => parse!(sensor_radius),
            "n_spots" => parse!(n_spots),
            "spot_amount_min" => parse!(spot_amount_min),
            "spot_amount_max" => parse!(spot_amount_max),
            "spot_sigma_min" => parse!(spot_sigma_min),
            "spot_sigma_max" => parse!(spot_sigma_max),
            "spot_center_margin" => parse!(spot_center_margin),
            "decay_rate" => parse!(decay_rate),
            "decay_mode" => {
                self.decay_mode = match value.trim() {
                    "multiplicative" => DecayMode::Multiplicative,
                    "subtractive" => DecayMode::Subtractive,
                    _ => return Err(bad()),
                }
            }
            "deposit_value" => parse!(deposit_value),
            "single_steps" => parse!(single_steps),
            "multi_steps" => parse!(multi_steps),
            "multi_agents" => parse!(multi_agents),
            "max_generations" => parse!(max_generations),
            "population" => parse!(population),
            "init_sigma" => parse!(init_sigma),
            "eval_every" => parse!(eval_every),
            "trials_per_candidate" => parse!(trials_per_candidate),
            "trace_stride_single" => parse!(trace_stride_single),
            "trace_stride_multi" => parse!(trace_stride_multi),
            "mi_bin_width" => parse!(mi_bin_width),
            "energy_bins" => parse!(energy_bins),
            "correlogram_window" => parse!(correlogram_window),
            "correlogram_max_lag" => parse!(correlogram_max_lag),
            "save_probe_traces" => parse!(save_probe_traces),
            "workers" => parse!(workers),
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Parses the flat `key = value` format. `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: idx + 1,
                text: raw.to_string(),
            })?;
            cfg.set_key(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError::OutOfBounds(m));
        let dims = self.field_width.min(self.field_height);
        if dims < 8 {
            return err(format!(
                "field {}x{} too small",
                self.field_width, self.field_height
            ));
        }
        if !self.sensor_radius.is_finite()
            || self.sensor_radius <= 0.0
            || self.sensor_radius + 1.0 >= dims as f64 / 2.0
        {
            return err(format!(
                "sensor radius {} does not fit the field",
                self.sensor_radius
            ));
        }
        if !(self.body_radius > 0.0 && self.body_radius.is_finite()) {
            return err(format!("body radius {} must be positive", self.body_radius));
        }
        if !(0.0..1.0).contains(&self.decay_rate) {
            return err(format!("decay rate {} outside [0,1)", self.decay_rate));
        }
        if !(self.deposit_value > 0.0 && self.deposit_value.is_finite()) {
            return err(format!(
                "deposit value {} must be positive",
                self.deposit_value
            ));
        }
        if self.spot_amount_min > self.spot_amount_max
            || self.spot_sigma_min > self.spot_sigma_max
            || self.spot_amount_min < 0.0
            || self.spot_sigma_min <= 0.0
        {
            return err("spot parameter ranges are empty or negative".into());
        }
        if self.spot_center_margin < 0.0 || 2.0 * self.spot_center_margin + 1.0 >= dims as f64 {
            return err(format!(
                "spot center margin {} does not fit the field",
                self.spot_center_margin
            ));
        }
        if self.single_steps == 0 || self.multi_steps == 0 {
            return err("step counts must be positive".into());
        }
        if self.multi_agents == 0 {
            return err("multi_agents must be positive".into());
        }
        if self.population < 2 {
            return err(format!("population {} < 2", self.population));
        }
        if !(self.init_sigma > 0.0 && self.init_sigma.is_finite()) {
            return err(format!("init_sigma {} must be positive", self.init_sigma));
        }
        if self.eval_every == 0 {
            return err("eval_every must be at least 1".into());
        }
        if self.trials_per_candidate == 0 {
            return err("trials_per_candidate must be at least 1".into());
        }
        if self.trace_stride_single == 0 || self.trace_stride_multi == 0 {
            return err("trace strides must be at least 1".into());
        }
        if !(self.mi_bin_width > 0.0 && self.mi_bin_width <= 1.0) {
            return err(format!("mi_bin_width {} outside (0,1]", self.mi_bin_width));
        }
        if self.energy_bins == 0 {
            return err("energy_bins must be at least 1".into());
        }
        if self.correlogram_window < 2 {
            return err("correlogram_window must be at least 2".into());
        }
        Ok(())
    }

    pub fn spot_ranges(&self) -> SpotRanges {
        SpotRanges {
            amount: (self.spot_amount_min, self.spot_amount_max),
            sigma: (self.spot_sigma_min, self.spot_sigma_max),
            center_margin: self.spot_center_margin,
        }
    }

    /// Episode config for one single-agent evolution episode.
    pub fn single_episode(&self, seed: u64, trace_stride: u32) -> EpisodeConfig {
        EpisodeConfig {
            phase: Phase::Single,
            steps: self.single_steps,
            n_agents: 1,
            width: self.field_width,
            height: self.field_height,
            body_radius: self.body_radius,
            sensor_radius: self.sensor_radius,
            decay_rate: self.decay_rate,
            decay_mode: self.decay_mode,
            deposit_value: self.deposit_value,
            n_spots: self.n_spots,
            spot_ranges: self.spot_ranges(),
            trace_stride,
            seed,
        }
    }

    /// Episode config for one homogeneous multi-agent episode.
    pub fn multi_episode(&self, seed: u64) -> EpisodeConfig {
        EpisodeConfig {
            phase: Phase::Multi,
            steps: self.multi_steps,
            n_agents: self.multi_agents,
            width: self.field_width,
            height: self.field_height,
            body_radius: self.body_radius,
            sensor_radius: self.sensor_radius,
            decay_rate: self.decay_rate,
            decay_mode: self.decay_mode,
            deposit_value: self.deposit_value,
            n_spots: 0,
            spot_ranges: self.spot_ranges(),
            trace_stride: self.trace_stride_multi,
            seed,
        }
    }

    /// Pretty JSON echo for the run directory.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

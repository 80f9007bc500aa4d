//! Episode engine: runs single-agent chemotaxis episodes (random Gaussian
//! spots, no deposition) and homogeneous multi-agent episodes (empty field,
//! per-step deposition) under one fixed step schedule.
//!
//! Step schedule, in order: (1) every agent senses the current field,
//! (2) every agent computes its motor command, (3) every agent moves,
//! (4) multi phase only: every agent deposits at its pre-move position in
//! ascending agent ID (last writer owns overlaps), (5) the field decays,
//! (6) every agent accrues the clamped field amount at its new position,
//! excluding cells it owns itself. Phases 1-3 and 6 are order-independent
//! across agents; only phase 4 is order-sensitive, by construction.
//!
//! Fitness accrues after decay. Identical (genome, config, seed) produce
//! bit-identical results at any worker count.

use rayon::prelude::*;
use thiserror::Error;

use crate::agent::{read_sensors, rule_based_policy, step_kinematics, AgentState};
use crate::controller::{decode, forward, ControllerError, Genome, LayerWeights, MotorCommand};
use crate::field::{DecayMode, PheromoneField, SpotRanges};
use crate::seed::{derive_rng, Purpose};
use crate::trace::{AgentTrace, EpisodeTrace, TraceRow};

/// Agent count above which the per-step agent map runs on the rayon pool.
const PARALLEL_AGENT_THRESHOLD: usize = 64;

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("invalid episode config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Single,
    Multi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub phase: Phase,
    pub steps: u32,
    pub n_agents: u32,
    pub width: u32,
    pub height: u32,
    pub body_radius: f64,
    pub sensor_radius: f64,
    pub decay_rate: f64,
    pub decay_mode: DecayMode,
    pub deposit_value: f64,
    /// Initial Gaussian spots; single phase only.
    pub n_spots: u32,
    pub spot_ranges: SpotRanges,
    /// Logging stride: rows at steps that are multiples of the stride plus
    /// the final step. 0 disables tracing (fitness only).
    pub trace_stride: u32,
    pub seed: u64,
}

impl EpisodeConfig {
    /// Single-agent evolution episode defaults: 600x600 field, 5 spots,
    /// 1000 steps, decay 0.001.
    pub fn single(seed: u64) -> Self {
        EpisodeConfig {
            phase: Phase::Single,
            steps: 1000,
            n_agents: 1,
            width: 600,
            height: 600,
            body_radius: crate::agent::BODY_RADIUS,
            sensor_radius: crate::agent::SENSOR_RADIUS,
            decay_rate: 0.001,
            decay_mode: DecayMode::Multiplicative,
            deposit_value: 1.0,
            n_spots: 5,
            spot_ranges: SpotRanges::default(),
            trace_stride: 1,
            seed,
        }
    }

    /// Multi-agent probe defaults: 1024 clones, 5000 steps, empty field
    /// with deposition, trace stride 5 (1000 logged steps).
    pub fn multi(seed: u64) -> Self {
        EpisodeConfig {
            phase: Phase::Multi,
            steps: 5000,
            n_agents: 1024,
            width: 600,
            height: 600,
            body_radius: crate::agent::BODY_RADIUS,
            sensor_radius: crate::agent::SENSOR_RADIUS,
            decay_rate: 0.001,
            decay_mode: DecayMode::Multiplicative,
            deposit_value: 1.0,
            n_spots: 0,
            spot_ranges: SpotRanges::default(),
            trace_stride: 5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), EpisodeError> {
        let err = |msg: String| Err(EpisodeError::InvalidConfig(msg));
        if self.steps == 0 {
            return err("steps must be positive".into());
        }
        if self.n_agents == 0 {
            return err("n_agents must be positive".into());
        }
        if self.width < 8 || self.height < 8 {
            return err(format!("field {}x{} too small", self.width, self.height));
        }
        if !(self.body_radius > 0.0 && self.body_radius.is_finite()) {
            return err(format!("body radius {} must be positive", self.body_radius));
        }
        if !self.sensor_radius.is_finite()
            || self.sensor_radius <= 0.0
            || self.sensor_radius + 1.0 >= self.width.min(self.height) as f64 / 2.0
        {
            return err(format!(
                "sensor radius {} does not fit a {}x{} field",
                self.sensor_radius, self.width, self.height
            ));
        }
        if !(0.0..1.0).contains(&self.decay_rate) {
            return err(format!("decay rate {} outside [0,1)", self.decay_rate));
        }
        if self.deposit_value <= 0.0 || !self.deposit_value.is_finite() {
            return err(format!(
                "deposit value {} must be positive",
                self.deposit_value
            ));
        }
        match self.phase {
            Phase::Single if self.n_agents != 1 => err(format!(
                "single phase needs exactly 1 agent, got {}",
                self.n_agents
            )),
            Phase::Multi if self.n_spots != 0 => err(format!(
                "multi phase starts on an empty field, got {} spots",
                self.n_spots
            )),
            _ => Ok(()),
        }
    }
}

/// Controller driving every agent of an episode.
#[derive(Clone, Copy)]
pub enum Policy<'a> {
    Network(&'a LayerWeights),
    RuleBased,
}

impl Policy<'_> {
    fn act(
        &self,
        sensors: &[f64; 6],
        state: &crate::controller::ControllerState,
    ) -> Result<(MotorCommand, crate::controller::ControllerState), ControllerError> {
        match self {
            Policy::Network(w) => forward(w, sensors, state),
            // The rule-based agent has no internal state; the context rides
            // along unchanged so traces stay uniform.
            Policy::RuleBased => Ok((rule_based_policy(sensors), *state)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    /// Per-agent fitness: the discrete sum of per-step gains.
    pub fitness: Vec<f64>,
    pub trace: EpisodeTrace,
    pub final_field: PheromoneField,
    pub final_agents: Vec<AgentState>,
}

/// Arithmetic mean of per-agent fitness.
pub fn collective_fitness(result: &EpisodeResult) -> f64 {
    result.fitness.iter().sum::<f64>() / result.fitness.len() as f64
}

struct AgentStep {
    state: AgentState,
    sensors: [f64; 6],
    raw: [f64; 2],
}

/// Runs an episode from explicit initial conditions. `run_single` and
/// `run_multi` build the standard randomized initial conditions on top of
/// this.
pub fn run_episode(
    mut field: PheromoneField,
    mut agents: Vec<AgentState>,
    policy: Policy<'_>,
    cfg: &EpisodeConfig,
) -> Result<EpisodeResult, EpisodeError> {
    cfg.validate()?;
    if agents.len() != cfg.n_agents as usize {
        return Err(EpisodeError::InvalidConfig(format!(
            "{} agents provided, config says {}",
            agents.len(),
            cfg.n_agents
        )));
    }
    let n = agents.len();
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let deposit = cfg.phase == Phase::Multi;
    let stride = cfg.trace_stride;

    let mut fitness = vec![0.0f64; n];
    let mut gain_window = vec![0.0f64; n];
    let rows_cap = if stride == 0 {
        0
    } else {
        cfg.steps.div_ceil(stride) as usize
    };
    let mut rows: Vec<Vec<TraceRow>> = (0..n).map(|_| Vec::with_capacity(rows_cap)).collect();

    for step in 1..=cfg.steps {
        // Phases 1-3: pure per-agent work against the frozen field.
        let advance = |a: &AgentState| -> Result<AgentStep, ControllerError> {
            let sensors = read_sensors(&field, a, cfg.body_radius, cfg.sensor_radius);
            let (cmd, ctx) = policy.act(&sensors, &a.controller)?;
            let mut state = step_kinematics(a, &cmd, w, h);
            state.controller = ctx;
            Ok(AgentStep {
                state,
                sensors,
                raw: cmd.raw,
            })
        };
        let stepped: Vec<AgentStep> = if n >= PARALLEL_AGENT_THRESHOLD {
            agents.par_iter().map(advance).collect::<Result<_, _>>()?
        } else {
            agents.iter().map(advance).collect::<Result<_, _>>()?
        };

        // Phase 4: deposits at pre-move positions, ascending agent ID.
        if deposit {
            for s in &stepped {
                field.deposit(
                    s.state.id,
                    s.state.prev_x,
                    s.state.prev_y,
                    cfg.deposit_value,
                );
            }
        }

        // Phase 5: evaporation.
        field.decay(cfg.decay_rate);

        // Phase 6: gain accrual at the new positions. With tracing on,
        // fitness folds over the same window sums the trace stores, so the
        // gain column reconstructs F bit-identically at any stride.
        for (i, s) in stepped.iter().enumerate() {
            let g = field.gain_at(s.state.id, s.state.x, s.state.y);
            if stride == 0 {
                fitness[i] += g;
            }
            gain_window[i] += g;
        }

        if stride > 0 && (step % stride == 0 || step == cfg.steps) {
            for (i, s) in stepped.iter().enumerate() {
                rows[i].push(TraceRow {
                    step,
                    sensors: s.sensors,
                    raw: s.raw,
                    context: s.state.controller.context,
                    x: s.state.x,
                    y: s.state.y,
                    prev_x: s.state.prev_x,
                    prev_y: s.state.prev_y,
                    gain: gain_window[i],
                });
                fitness[i] += gain_window[i];
                gain_window[i] = 0.0;
            }
        }

        for (a, s) in agents.iter_mut().zip(stepped) {
            *a = s.state;
        }
    }

    let trace = EpisodeTrace {
        width: cfg.width,
        height: cfg.height,
        agents: agents
            .iter()
            .zip(rows)
            .map(|(a, rows)| AgentTrace {
                agent_id: a.id,
                rows,
            })
            .collect(),
    };
    Ok(EpisodeResult {
        fitness,
        trace,
        final_field: field,
        final_agents: agents,
    })
}

/// Standard initial conditions for an episode config: spots (single phase)
/// from the field-init stream, one pose stream per agent.
pub fn initial_conditions(cfg: &EpisodeConfig) -> (PheromoneField, Vec<AgentState>) {
    let field = if cfg.n_spots > 0 {
        let mut rng = derive_rng(cfg.seed, Purpose::FieldInit, &[]);
        PheromoneField::init_spots(
            cfg.width,
            cfg.height,
            cfg.decay_mode,
            &cfg.spot_ranges,
            cfg.n_spots,
            &mut rng,
        )
    } else {
        PheromoneField::empty(cfg.width, cfg.height, cfg.decay_mode)
    };
    let agents = (0..cfg.n_agents)
        .map(|id| {
            let mut rng = derive_rng(cfg.seed, Purpose::AgentPose, &[id as u64]);
            AgentState::random(id, cfg.width, cfg.height, &mut rng)
        })
        .collect();
    (field, agents)
}

/// Single-agent evolution episode: random spots, random pose, no deposits.
pub fn run_single(genome: &Genome, cfg: &EpisodeConfig) -> Result<EpisodeResult, EpisodeError> {
    if cfg.phase != Phase::Single {
        return Err(EpisodeError::InvalidConfig(
            "run_single needs a single-phase config".into(),
        ));
    }
    let weights = decode(genome);
    let (field, agents) = initial_conditions(cfg);
    run_episode(field, agents, Policy::Network(&weights), cfg)
}

/// Homogeneous multi-agent episode: the genome is decoded once and every
/// clone steps through the identical weights.
pub fn run_multi(genome: &Genome, cfg: &EpisodeConfig) -> Result<EpisodeResult, EpisodeError> {
    if cfg.phase != Phase::Multi {
        return Err(EpisodeError::InvalidConfig(
            "run_multi needs a multi-phase config".into(),
        ));
    }
    let weights = decode(genome);
    let (field, agents) = initial_conditions(cfg);
    run_episode(field, agents, Policy::Network(&weights), cfg)
}

/// Episode driven by the rule-based policy instead of a network.
pub fn run_rule_based(cfg: &EpisodeConfig) -> Result<EpisodeResult, EpisodeError> {
    let (field, agents) = initial_conditions(cfg);
    run_episode(field, agents, Policy::RuleBased, cfg)
}

//! Deterministic pheromone-field swarm simulator.
//!
//! A single recurrent-network agent is evolved for chemotaxis with CMA-ES,
//! the evolved genome is cloned into large homogeneous populations that
//! communicate through pheromone deposits, and the collective behavior is
//! quantified with fitness, information-theoretic, and kinetic-energy
//! metrics. Every run is a pure function of its master seed.

pub mod agent;
pub mod cma;
pub mod commands;
pub mod config;
pub mod controller;
pub mod episode;
pub mod evolve;
pub mod field;
pub mod io;
pub mod metrics;
pub mod seed;
pub mod space;
pub mod trace;

pub use commands::{cmd_analyze, cmd_evolve, cmd_multi, cmd_rulebased, CommandError};
pub use config::RunConfig;
pub use controller::{
    decode, encode, forward, ControllerState, Genome, LayerWeights, MotorCommand,
};
pub use episode::{
    collective_fitness, run_episode, run_multi, run_rule_based, run_single, EpisodeConfig,
    EpisodeResult, Phase, Policy,
};
pub use evolve::{run_evolution, EvolveOutcome};
pub use field::{DecayMode, GaussianSpot, PheromoneField, SpotRanges};
pub use metrics::{InfoDecomposition, MetricsRow};
pub use trace::{AgentTrace, EpisodeTrace, TraceRow};

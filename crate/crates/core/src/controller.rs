//! Recurrent network controller: 82 weights, 6 sensor inputs, 6 hidden
//! units, 2 motor outputs, 2 context units fed back as next-step inputs.
//!
//! Layer shapes: input→hidden is 6×9 (per hidden unit: 1 bias, 6 sensors,
//! 2 context), hidden→output is 4×7 (per output unit: 1 bias, 6 hidden);
//! the first two output units are the raw motor values, the last two become
//! the new context. 6·9 + 4·7 = 82.
//!
//! Genomes flatten row-major: all input→hidden rows first, then all
//! hidden→output rows. Checkpoint files store genomes in this order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const N_SENSORS: usize = 6;
pub const N_HIDDEN: usize = 6;
pub const N_CONTEXT: usize = 2;
pub const N_MOTORS: usize = 2;

/// 1 bias + 6 sensors + 2 context.
pub const INPUT_COLS: usize = 1 + N_SENSORS + N_CONTEXT;
/// 1 bias + 6 hidden.
pub const HIDDEN_COLS: usize = 1 + N_HIDDEN;
/// 2 motors + 2 context outputs.
pub const OUTPUT_ROWS: usize = N_MOTORS + N_CONTEXT;

pub const GENOME_LEN: usize = N_HIDDEN * INPUT_COLS + OUTPUT_ROWS * HIDDEN_COLS;

#[derive(Debug, Error, PartialEq)]
pub enum ControllerError {
    #[error("genome has {got} weights, expected {GENOME_LEN}")]
    WrongLength { got: usize },
    #[error("genome weight {index} is not finite")]
    NonFinite { index: usize },
    #[error("non-finite value in forward pass (overflowing weights)")]
    NumericError,
}

/// Flat vector of the 82 synaptic weights; the unit of evolution and
/// checkpointing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome(Vec<f64>);

impl Genome {
    pub fn new(weights: Vec<f64>) -> Result<Self, ControllerError> {
        if weights.len() != GENOME_LEN {
            return Err(ControllerError::WrongLength { got: weights.len() });
        }
        if let Some(index) = weights.iter().position(|w| !w.is_finite()) {
            return Err(ControllerError::NonFinite { index });
        }
        Ok(Genome(weights))
    }

    pub fn zeros() -> Self {
        Genome(vec![0.0; GENOME_LEN])
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }
}

/// Genome rearranged into the two weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    /// Rows: hidden units. Columns: [bias, s0..s5, c0, c1].
    pub input_to_hidden: [[f64; INPUT_COLS]; N_HIDDEN],
    /// Rows: [motor0, motor1, context0, context1]. Columns: [bias, h0..h5].
    pub hidden_to_output: [[f64; HIDDEN_COLS]; OUTPUT_ROWS],
}

/// Recurrent state carried between steps: the two context unit values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub context: [f64; N_CONTEXT],
}

impl ControllerState {
    /// Episode-start state: the fixed point of an all-zero network,
    /// sigmoid(0) on both units.
    pub fn initial() -> Self {
        ControllerState {
            context: [0.5, 0.5],
        }
    }
}

/// One step's motor command. `raw` keeps the pre-scaling network outputs
/// in [0,1] for the information-theoretic analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorCommand {
    /// Linear velocity, cells per step, in [0,1].
    pub v: f64,
    /// Angular velocity, radians per step, in [-0.05, 0.05].
    pub omega: f64,
    pub raw: [f64; N_MOTORS],
}

impl MotorCommand {
    /// Applies the fixed output scaling: v = raw0, omega = (raw1 - 0.5) * 0.1.
    pub fn from_raw(raw: [f64; N_MOTORS]) -> Self {
        MotorCommand {
            v: raw[0],
            omega: (raw[1] - 0.5) * 0.1,
            raw,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Rearranges the flat genome into layer matrices. Inverse of [`encode`].
pub fn decode(genome: &Genome) -> LayerWeights {
    let w = genome.weights();
    let mut input_to_hidden = [[0.0; INPUT_COLS]; N_HIDDEN];
    let mut hidden_to_output = [[0.0; HIDDEN_COLS]; OUTPUT_ROWS];
    let mut k = 0;
    for row in &mut input_to_hidden {
        for cell in row.iter_mut() {
            *cell = w[k];
            k += 1;
        }
    }
    for row in &mut hidden_to_output {
        for cell in row.iter_mut() {
            *cell = w[k];
            k += 1;
        }
    }
    LayerWeights {
        input_to_hidden,
        hidden_to_output,
    }
}

/// Flattens layer matrices back to the genome order.
pub fn encode(weights: &LayerWeights) -> Genome {
    let mut flat = Vec::with_capacity(GENOME_LEN);
    for row in &weights.input_to_hidden {
        flat.extend_from_slice(row);
    }
    for row in &weights.hidden_to_output {
        flat.extend_from_slice(row);
    }
    Genome(flat)
}

/// One sensor-to-motor forward step.
///
/// Input vector is [1, sensors.., context..]; both layers apply the logistic
/// sigmoid; outputs 0-1 are the raw motor values, outputs 2-3 the new
/// context. Pure function of its arguments.
pub fn forward(
    weights: &LayerWeights,
    sensors: &[f64; N_SENSORS],
    state: &ControllerState,
) -> Result<(MotorCommand, ControllerState), ControllerError> {
    let mut input = [0.0; INPUT_COLS];
    input[0] = 1.0;
    input[1..1 + N_SENSORS].copy_from_slice(sensors);
    input[1 + N_SENSORS..].copy_from_slice(&state.context);

    let mut hidden = [0.0; HIDDEN_COLS];
    hidden[0] = 1.0;
    for (j, row) in weights.input_to_hidden.iter().enumerate() {
        let mut acc = 0.0;
        for (w, x) in row.iter().zip(input.iter()) {
            acc += w * x;
        }
        hidden[1 + j] = sigmoid(acc);
    }

    let mut out = [0.0; OUTPUT_ROWS];
    for (j, row) in weights.hidden_to_output.iter().enumerate() {
        let mut acc = 0.0;
        for (w, x) in row.iter().zip(hidden.iter()) {
            acc += w * x;
        }
        out[j] = sigmoid(acc);
    }

    if out.iter().any(|y| !y.is_finite()) {
        return Err(ControllerError::NumericError);
    }

    let cmd = MotorCommand::from_raw([out[0], out[1]]);
    let next = ControllerState {
        context: [out[2], out[3]],
    };
    Ok((cmd, next))
}

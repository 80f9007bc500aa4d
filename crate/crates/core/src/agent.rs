//! Embodied agent: sensor geometry, sensor readout, motion update under
//! periodic boundaries, and the fixed rule-based chemotaxis policy.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::controller::{ControllerState, MotorCommand, N_SENSORS};
use crate::field::PheromoneField;
use crate::space::wrap_pos;

/// Default distance of the five peripheral sensors from the body center,
/// in cells.
pub const BODY_RADIUS: f64 = 20.0;
/// Default sensing-disc radius of every sensor, in cells.
pub const SENSOR_RADIUS: f64 = 2.0;

/// Peripheral sensor angles relative to the heading, mirror-symmetric about
/// it: sensor 0 forward, 1/4 and 2/3 mirrored pairs. Sensor 5 sits at the
/// body center.
pub const SENSOR_OFFSETS: [f64; 5] = [
    0.0,
    0.4 * std::f64::consts::PI,  //  +72 deg
    0.8 * std::f64::consts::PI,  // +144 deg
    -0.8 * std::f64::consts::PI, // -144 deg
    -0.4 * std::f64::consts::PI, //  -72 deg
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    /// Heading in radians; accumulates without wrapping, used only through
    /// cos/sin.
    pub theta: f64,
    pub controller: ControllerState,
    pub prev_x: f64,
    pub prev_y: f64,
}

impl AgentState {
    pub fn new(id: u32, x: f64, y: f64, theta: f64) -> Self {
        AgentState {
            id,
            x,
            y,
            theta,
            controller: ControllerState::initial(),
            prev_x: x,
            prev_y: y,
        }
    }

    /// Uniform random pose: position over the field, heading over [0, 2pi).
    /// Draw order: x, y, theta.
    pub fn random(id: u32, width: u32, height: u32, rng: &mut ChaCha8Rng) -> Self {
        let x = rng.random_range(0.0..width as f64);
        let y = rng.random_range(0.0..height as f64);
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        Self::new(id, x, y, theta)
    }
}

/// World positions of the six sensors: five at `body_radius` from the
/// center along the offset angles, the sixth at the center. Wrapped.
pub fn sensor_positions(
    state: &AgentState,
    body_radius: f64,
    width: f64,
    height: f64,
) -> [(f64, f64); N_SENSORS] {
    let mut out = [(0.0, 0.0); N_SENSORS];
    for (k, off) in SENSOR_OFFSETS.iter().enumerate() {
        let a = state.theta + off;
        out[k] = (
            wrap_pos(state.x + body_radius * a.cos(), width),
            wrap_pos(state.y + body_radius * a.sin(), height),
        );
    }
    out[5] = (state.x, state.y);
    out
}

/// Disc readout of the field at each sensor position.
pub fn read_sensors(
    field: &PheromoneField,
    state: &AgentState,
    body_radius: f64,
    sensor_radius: f64,
) -> [f64; N_SENSORS] {
    let (w, h) = (field.width() as f64, field.height() as f64);
    let positions = sensor_positions(state, body_radius, w, h);
    let mut out = [0.0; N_SENSORS];
    for (v, (x, y)) in out.iter_mut().zip(positions.iter()) {
        *v = field.sense_disc(*x, *y, sensor_radius);
    }
    out
}

/// Motion update: the turn applies before the translation within the same
/// step, and the position wraps periodically. The pre-step position is
/// recorded in prev_x/prev_y.
pub fn step_kinematics(
    state: &AgentState,
    cmd: &MotorCommand,
    width: f64,
    height: f64,
) -> AgentState {
    let theta = state.theta + cmd.omega;
    AgentState {
        id: state.id,
        x: wrap_pos(state.x + cmd.v * theta.cos(), width),
        y: wrap_pos(state.y + cmd.v * theta.sin(), height),
        theta,
        controller: state.controller,
        prev_x: state.x,
        prev_y: state.y,
    }
}

/// Motor outputs of the stateless rule-based agent, keyed by the strongest
/// sensor (ties broken by lowest sensor ID). Stored as raw values so the
/// scaled command matches the table:
///
/// sensor 0 -> v 1.0, w  0.00      sensor 3 -> v 0.2, w -0.04
/// sensor 1 -> v 0.6, w  0.02      sensor 4 -> v 0.6, w -0.02
/// sensor 2 -> v 0.2, w  0.04      sensor 5 -> v 0.0, w  0.00
const RULE_TABLE_RAW: [[f64; 2]; 6] = [
    [1.0, 0.5],
    [0.6, 0.7],
    [0.2, 0.9],
    [0.2, 0.1],
    [0.6, 0.3],
    [0.0, 0.5],
];

/// Index of the strongest sensor, lowest ID on ties.
pub fn strongest_sensor(sensors: &[f64; N_SENSORS]) -> usize {
    let mut best = 0;
    for k in 1..N_SENSORS {
        if sensors[k] > sensors[best] {
            best = k;
        }
    }
    best
}

/// Reactive chemotaxis policy: move toward the strongest sensor, halt when
/// the center sensor dominates.
pub fn rule_based_policy(sensors: &[f64; N_SENSORS]) -> MotorCommand {
    MotorCommand::from_raw(RULE_TABLE_RAW[strongest_sensor(sensors)])
}

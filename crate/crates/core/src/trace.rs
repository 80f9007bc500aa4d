//! Per-step episode logs and their CSV interchange format.
//!
//! One CSV per episode, agent-major, with header
//! `step,agent_id,s0,s1,s2,s3,s4,s5,o0,o1,c0,c1,x,y,px,py,gain`.
//!
//! `px,py` are the agent's position one step before the logged step, so
//! per-step displacement (and kinetic energy) stays computable at any
//! sampling stride. `gain` accumulates everything accrued since the
//! previous logged row (inclusive of the logged step); summing the column
//! therefore reconstructs the episode fitness exactly at any stride.
//! Floats are printed with the shortest representation that parses back
//! bit-identically.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use crate::controller::{N_MOTORS, N_SENSORS};

pub const TRACE_HEADER: &str = "step,agent_id,s0,s1,s2,s3,s4,s5,o0,o1,c0,c1,x,y,px,py,gain";
const TRACE_COLS: usize = 17;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected header '{TRACE_HEADER}'")]
    BadHeader { line: usize },
    #[error("line {line}: expected {TRACE_COLS} fields, found {found}")]
    WrongFieldCount { line: usize, found: usize },
    #[error("line {line}, column {column}: cannot parse '{value}'")]
    BadField {
        line: usize,
        column: &'static str,
        value: String,
    },
    #[error("line {line}: agent {agent} rows are not contiguous")]
    NonContiguousAgent { line: usize, agent: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: u32,
    pub sensors: [f64; N_SENSORS],
    pub raw: [f64; N_MOTORS],
    pub context: [f64; 2],
    pub x: f64,
    pub y: f64,
    pub prev_x: f64,
    pub prev_y: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentTrace {
    pub agent_id: u32,
    pub rows: Vec<TraceRow>,
}

impl AgentTrace {
    /// Sum of the gain column: the agent's episode fitness.
    pub fn gain_sum(&self) -> f64 {
        self.rows.iter().map(|r| r.gain).sum()
    }
}

/// All agent logs of one episode plus the field dimensions the positions
/// live on (needed for wrap-aware displacement).
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub width: u32,
    pub height: u32,
    pub agents: Vec<AgentTrace>,
}

fn push_f64(buf: &mut String, v: f64) {
    // Shortest round-trip formatting; `{}` on f64 is lossless.
    write!(buf, ",{v}").expect("string write");
}

pub fn write_trace_csv(path: &Path, trace: &EpisodeTrace) -> Result<(), TraceError> {
    let io_err = |source| TraceError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "{TRACE_HEADER}").map_err(io_err)?;
    let mut buf = String::new();
    for agent in &trace.agents {
        for r in &agent.rows {
            buf.clear();
            write!(buf, "{},{}", r.step, agent.agent_id).expect("string write");
            for s in &r.sensors {
                push_f64(&mut buf, *s);
            }
            for o in &r.raw {
                push_f64(&mut buf, *o);
            }
            for c in &r.context {
                push_f64(&mut buf, *c);
            }
            push_f64(&mut buf, r.x);
            push_f64(&mut buf, r.y);
            push_f64(&mut buf, r.prev_x);
            push_f64(&mut buf, r.prev_y);
            push_f64(&mut buf, r.gain);
            writeln!(out, "{buf}").map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)
}

/// Parses a trace CSV written by [`write_trace_csv`]. Field dimensions are
/// not stored in the CSV and must be supplied by the caller.
pub fn read_trace_csv(path: &Path, width: u32, height: u32) -> Result<EpisodeTrace, TraceError> {
    let io_err = |source| TraceError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or(TraceError::BadHeader { line: 1 })?
        .map_err(io_err)?;
    if header.trim() != TRACE_HEADER {
        return Err(TraceError::BadHeader { line: 1 });
    }

    let mut agents: Vec<AgentTrace> = Vec::new();
    let mut seen: std::collections::HashSet<u32> = std::collections::HashSet::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != TRACE_COLS {
            return Err(TraceError::WrongFieldCount {
                line: line_no,
                found: fields.len(),
            });
        }
        let parse_u32 = |col: usize, name: &'static str| -> Result<u32, TraceError> {
            fields[col].parse().map_err(|_| TraceError::BadField {
                line: line_no,
                column: name,
                value: fields[col].to_string(),
            })
        };
        let parse_f64 = |col: usize, name: &'static str| -> Result<f64, TraceError> {
            fields[col].parse().map_err(|_| TraceError::BadField {
                line: line_no,
                column: name,
                value: fields[col].to_string(),
            })
        };
        let step = parse_u32(0, "step")?;
        let agent_id = parse_u32(1, "agent_id")?;
        let mut sensors = [0.0; N_SENSORS];
        const SENSOR_NAMES: [&str; 6] = ["s0", "s1", "s2", "s3", "s4", "s5"];
        for (k, s) in sensors.iter_mut().enumerate() {
            *s = parse_f64(2 + k, SENSOR_NAMES[k])?;
        }
        let raw = [parse_f64(8, "o0")?, parse_f64(9, "o1")?];
        let context = [parse_f64(10, "c0")?, parse_f64(11, "c1")?];
        let row = TraceRow {
            step,
            sensors,
            raw,
            context,
            x: parse_f64(12, "x")?,
            y: parse_f64(13, "y")?,
            prev_x: parse_f64(14, "px")?,
            prev_y: parse_f64(15, "py")?,
            gain: parse_f64(16, "gain")?,
        };
        match agents.last_mut() {
            Some(last) if last.agent_id == agent_id => last.rows.push(row),
            _ => {
                if !seen.insert(agent_id) {
                    return Err(TraceError::NonContiguousAgent {
                        line: line_no,
                        agent: agent_id,
                    });
                }
                agents.push(AgentTrace {
                    agent_id,
                    rows: vec![row],
                });
            }
        }
    }
    Ok(EpisodeTrace {
        width,
        height,
        agents,
    })
}

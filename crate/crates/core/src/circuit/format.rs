//! The `modcc-circuit-v1` JSON file format.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{validate, GateId, LayeredCircuit, ModGate, Source, Violation, Wire};

pub const FORMAT_TAG: &str = "modcc-circuit-v1";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed circuit JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format tag {0:?}")]
    Tag(String),
    #[error("constant values must be 0 or 1, got {0}")]
    Constant(u64),
    #[error("circuit fails validation: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

#[derive(Serialize, Deserialize)]
struct FileCircuit {
    format: String,
    num_inputs: usize,
    constants: Vec<u64>,
    levels: Vec<FileLevel>,
    gates: Vec<FileGate>,
    output: GateId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<Value>,
}

#[derive(Serialize, Deserialize)]
struct FileLevel {
    modulus: u64,
}

#[derive(Serialize, Deserialize)]
struct FileGate {
    id: GateId,
    level: usize,
    modulus: u64,
    accept: Vec<u64>,
    wires: Vec<FileWire>,
}

#[derive(Serialize, Deserialize)]
struct FileWire {
    src: Source,
    mult: u64,
}

/// Serialize with multiplicities canonicalized modulo each gate's modulus.
pub fn to_json(circuit: &LayeredCircuit) -> String {
    let c = circuit.normalized();
    let file = FileCircuit {
        format: FORMAT_TAG.to_string(),
        num_inputs: c.num_inputs,
        constants: c.constants.iter().map(|&b| b as u64).collect(),
        levels: c.levels.iter().map(|&modulus| FileLevel { modulus }).collect(),
        gates: c
            .gates
            .into_iter()
            .map(|g| FileGate {
                id: g.id,
                level: g.level,
                modulus: g.modulus,
                accept: g.accept,
                wires: g.wires.into_iter().map(|w| FileWire { src: w.src, mult: w.mult }).collect(),
            })
            .collect(),
        output: c.output,
        origin: c.origin,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("circuit serialization cannot fail");
    s.push('\n');
    s
}

/// Parse and validate.
pub fn from_json(text: &str) -> Result<LayeredCircuit, FormatError> {
    let file: FileCircuit = serde_json::from_str(text)?;
    if file.format != FORMAT_TAG {
        return Err(FormatError::Tag(file.format));
    }
    let constants = file
        .constants
        .iter()
        .map(|&v| match v {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(FormatError::Constant(other)),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let circuit = LayeredCircuit {
        num_inputs: file.num_inputs,
        constants,
        levels: file.levels.iter().map(|l| l.modulus).collect(),
        gates: file
            .gates
            .into_iter()
            .map(|g| ModGate {
                id: g.id,
                level: g.level,
                modulus: g.modulus,
                accept: g.accept,
                wires: g.wires.into_iter().map(|w| Wire { src: w.src, mult: w.mult }).collect(),
            })
            .collect(),
        output: file.output,
        origin: file.origin,
    };
    let violations = validate(&circuit);
    if violations.is_empty() {
        Ok(circuit)
    } else {
        Err(FormatError::Invalid(violations))
    }
}

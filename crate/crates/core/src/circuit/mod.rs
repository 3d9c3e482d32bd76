//! Leveled circuits of generalized `MOD_m^A` gates.
//!
//! Level 1 reads inputs and constant slots; level `i > 1` reads only gates on
//! level `i - 1`. Wire multiplicities stand in for repeated wires, so variable
//! duplication never costs a level.

mod builder;
mod format;
pub mod random;
mod spike;

pub use builder::{Bundle, CircuitBuilder};
pub use format::{from_json, to_json, FormatError, FORMAT_TAG};
pub use spike::{spike_transform, SpikeMode};
pub use random::{random_circuit, RandomCircuitParams};

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::gf::factorize;

/// A positive integer together with its prime factorization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Modulus {
    value: u64,
    factors: Vec<(u64, u32)>,
}

impl Modulus {
    pub fn new(value: u64) -> Self {
        assert!(value >= 1, "modulus must be positive");
        Self { value, factors: factorize(value) }
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    /// Distinct primes, increasing.
    pub fn primes(&self) -> Vec<u64> {
        self.factors.iter().map(|&(p, _)| p).collect()
    }

    /// Number of distinct prime divisors.
    pub fn omega(&self) -> usize {
        self.factors.len()
    }

    /// Number of prime divisors that are at least `omega()`.
    pub fn varpi(&self) -> usize {
        let w = self.omega() as u64;
        self.factors.iter().filter(|&&(p, _)| p >= w).count()
    }

    /// The prime power `p^k` when `omega() == 1`.
    pub fn prime_power(&self) -> Option<(u64, u32)> {
        match self.factors.as_slice() {
            [(p, k)] => Some((*p, *k)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GateId(pub u32);

impl fmt::Display for GateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Input(usize),
    Const(usize),
    Gate(GateId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Wire {
    pub src: Source,
    pub mult: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModGate {
    pub id: GateId,
    pub level: usize,
    pub modulus: u64,
    /// Sorted, deduplicated accepting residues.
    pub accept: Vec<u64>,
    pub wires: Vec<Wire>,
}

impl ModGate {
    pub fn accepts(&self, residue: u64) -> bool {
        self.accept.binary_search(&residue).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayeredCircuit {
    pub num_inputs: usize,
    pub constants: Vec<bool>,
    /// Level moduli `m_1, ..., m_h`.
    pub levels: Vec<u64>,
    pub gates: Vec<ModGate>,
    pub output: GateId,
    /// Free-form provenance carried through serialization.
    pub origin: Option<serde_json::Value>,
}

/// A boolean tuple; `bits[i]` is `x_{i+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(pub Vec<bool>);

impl Assignment {
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Self((0..n).map(|i| mask >> i & 1 == 1).collect())
    }

    pub fn to_mask(&self) -> u64 {
        self.0.iter().enumerate().fold(0, |acc, (i, &b)| acc | (b as u64) << i)
    }

    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Assignment {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .chars()
            .filter(|c| !matches!(c, ',' | ' ' | '_'))
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(CircuitError::BadAssignment(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Assignment)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("assignment has {got} bits but the circuit has {expected} inputs")]
    ArityMismatch { expected: usize, got: usize },
    #[error("invalid circuit: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("invalid assignment character {0:?}")]
    BadAssignment(char),
    #[error("{n} inputs exceed the exhaustive guard of {guard}")]
    GuardExceeded { n: usize, guard: usize },
    #[error("spike translation tuples have length {got}, expected {expected}")]
    SpikeArity { expected: usize, got: usize },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// One broken structural rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoLevels,
    NoGates,
    DuplicateGateId(GateId),
    LevelOutOfRange { gate: GateId, level: usize },
    GateModulusTooSmall { gate: GateId, modulus: u64 },
    ModulusNotDividing { gate: GateId, gate_modulus: u64, level_modulus: u64 },
    AcceptOutOfRange { gate: GateId, value: u64 },
    AcceptNotSorted { gate: GateId },
    InputAboveLevelOne { gate: GateId },
    ConstAboveLevelOne { gate: GateId },
    InputOutOfRange { gate: GateId, input: usize },
    ConstOutOfRange { gate: GateId, slot: usize },
    UnknownSource { gate: GateId, src: GateId },
    BadLevelEdge { gate: GateId, src: GateId, src_level: usize },
    ZeroMultiplicity { gate: GateId },
    MissingOutput(GateId),
    OutputNotOnTopLevel { output: GateId, level: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            NoLevels => write!(f, "circuit has no levels"),
            NoGates => write!(f, "circuit has no gates"),
            DuplicateGateId(g) => write!(f, "duplicate gate id {g}"),
            LevelOutOfRange { gate, level } => write!(f, "{gate}: level {level} out of range"),
            GateModulusTooSmall { gate, modulus } => write!(f, "{gate}: gate modulus {modulus} < 2"),
            ModulusNotDividing { gate, gate_modulus, level_modulus } => {
                write!(f, "{gate}: {gate_modulus} ∤ {level_modulus}")
            }
            AcceptOutOfRange { gate, value } => write!(f, "{gate}: accept value {value} out of range"),
            AcceptNotSorted { gate } => write!(f, "{gate}: accept set not sorted/deduplicated"),
            InputAboveLevelOne { gate } => write!(f, "{gate}: input read above level 1"),
            ConstAboveLevelOne { gate } => write!(f, "{gate}: constant read above level 1"),
            InputOutOfRange { gate, input } => write!(f, "{gate}: input {input} out of range"),
            ConstOutOfRange { gate, slot } => write!(f, "{gate}: constant slot {slot} out of range"),
            UnknownSource { gate, src } => write!(f, "{gate}: unresolved source {src}"),
            BadLevelEdge { gate, src, src_level } => {
                write!(f, "{gate}: reads {src} on level {src_level}, not the previous level")
            }
            ZeroMultiplicity { gate } => write!(f, "{gate}: wire multiplicity 0"),
            MissingOutput(g) => write!(f, "output gate {g} does not exist"),
            OutputNotOnTopLevel { output, level } => {
                write!(f, "output gate {output} sits on level {level}, not the top level")
            }
        }
    }
}

/// Every violated structural invariant; empty means well-formed.
pub fn validate(circuit: &LayeredCircuit) -> Vec<Violation> {
    let mut out = Vec::new();
    let h = circuit.levels.len();
    if h == 0 {
        out.push(Violation::NoLevels);
    }
    if circuit.gates.is_empty() {
        out.push(Violation::NoGates);
    }
    let mut level_of: HashMap<GateId, usize> = HashMap::with_capacity(circuit.gates.len());
    for g in &circuit.gates {
        if level_of.insert(g.id, g.level).is_some() {
            out.push(Violation::DuplicateGateId(g.id));
        }
    }
    for g in &circuit.gates {
        if g.level == 0 || g.level > h {
            out.push(Violation::LevelOutOfRange { gate: g.id, level: g.level });
            continue;
        }
        let level_modulus = circuit.levels[g.level - 1];
        if g.modulus < 2 {
            out.push(Violation::GateModulusTooSmall { gate: g.id, modulus: g.modulus });
            continue;
        }
        if !level_modulus.is_multiple_of(g.modulus) {
            out.push(Violation::ModulusNotDividing {
                gate: g.id,
                gate_modulus: g.modulus,
                level_modulus,
            });
        }
        if let Some(&v) = g.accept.iter().find(|&&v| v >= g.modulus) {
            out.push(Violation::AcceptOutOfRange { gate: g.id, value: v });
        }
        if g.accept.windows(2).any(|w| w[0] >= w[1]) {
            out.push(Violation::AcceptNotSorted { gate: g.id });
        }
        for w in &g.wires {
            if w.mult == 0 {
                out.push(Violation::ZeroMultiplicity { gate: g.id });
            }
            match w.src {
                Source::Input(i) => {
                    if g.level != 1 {
                        out.push(Violation::InputAboveLevelOne { gate: g.id });
                    }
                    if i >= circuit.num_inputs {
                        out.push(Violation::InputOutOfRange { gate: g.id, input: i });
                    }
                }
                Source::Const(i) => {
                    if g.level != 1 {
                        out.push(Violation::ConstAboveLevelOne { gate: g.id });
                    }
                    if i >= circuit.constants.len() {
                        out.push(Violation::ConstOutOfRange { gate: g.id, slot: i });
                    }
                }
                Source::Gate(src) => match level_of.get(&src) {
                    None => out.push(Violation::UnknownSource { gate: g.id, src }),
                    Some(&l) if l + 1 != g.level => out.push(Violation::BadLevelEdge {
                        gate: g.id,
                        src,
                        src_level: l,
                    }),
                    Some(_) => {}
                },
            }
        }
    }
    match level_of.get(&circuit.output) {
        None => out.push(Violation::MissingOutput(circuit.output)),
        Some(&l) if l != h => out.push(Violation::OutputNotOnTopLevel { output: circuit.output, level: l }),
        Some(_) => {}
    }
    out
}

/// Size, depth, per-level gate counts, and wire counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CircuitStats {
    pub size: usize,
    pub depth: usize,
    pub gates_per_level: Vec<usize>,
    pub wires: usize,
    pub total_multiplicity: u64,
}

pub fn circuit_stats(circuit: &LayeredCircuit) -> Result<CircuitStats, CircuitError> {
    let v = validate(circuit);
    if !v.is_empty() {
        return Err(CircuitError::Invalid(v));
    }
    let mut per_level = vec![0; circuit.levels.len()];
    for g in &circuit.gates {
        per_level[g.level - 1] += 1;
    }
    Ok(CircuitStats {
        size: circuit.gates.len(),
        depth: circuit.levels.len(),
        gates_per_level: per_level,
        wires: circuit.gates.iter().map(|g| g.wires.len()).sum(),
        total_multiplicity: circuit.gates.iter().flat_map(|g| &g.wires).map(|w| w.mult).sum(),
    })
}

impl LayeredCircuit {
    pub fn size(&self) -> usize {
        self.gates.len()
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn gate(&self, id: GateId) -> Option<&ModGate> {
        self.gates.iter().find(|g| g.id == id)
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        let v = validate(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(CircuitError::Invalid(v))
        }
    }

    pub fn compile(&self) -> Result<CompiledCircuit, CircuitError> {
        CompiledCircuit::new(self)
    }

    /// Same circuit with every multiplicity reduced modulo its gate's
    /// modulus; wires that vanish are dropped.
    pub fn normalized(&self) -> LayeredCircuit {
        let mut c = self.clone();
        for g in &mut c.gates {
            let m = g.modulus.max(1);
            g.wires = g
                .wires
                .iter()
                .map(|w| Wire { src: w.src, mult: w.mult % m })
                .filter(|w| w.mult != 0)
                .collect();
        }
        c
    }
}

/// Evaluate on one assignment.
pub fn evaluate(circuit: &LayeredCircuit, a: &Assignment) -> Result<bool, CircuitError> {
    let compiled = circuit.compile()?;
    compiled.eval(&a.0)
}

/// A validated circuit flattened into topological order for fast repeated
/// evaluation. Value slots are laid out as inputs, constants, then gates.
#[derive(Debug, Clone)]
pub struct CompiledCircuit {
    num_inputs: usize,
    constants: Vec<bool>,
    gates: Vec<CompiledGate>,
    /// `gate_ids[k]` is the id of the gate in slot `k`.
    gate_ids: Vec<GateId>,
    output_slot: usize,
}

#[derive(Debug, Clone)]
struct CompiledGate {
    modulus: u64,
    accept: Vec<bool>,
    wires: Vec<(u32, u64)>,
}

impl CompiledCircuit {
    pub fn new(circuit: &LayeredCircuit) -> Result<Self, CircuitError> {
        circuit.validate()?;
        let mut order: Vec<usize> = (0..circuit.gates.len()).collect();
        order.sort_by_key(|&i| circuit.gates[i].level);
        let base = circuit.num_inputs + circuit.constants.len();
        let slot_of: HashMap<GateId, usize> =
            order.iter().enumerate().map(|(k, &i)| (circuit.gates[i].id, base + k)).collect();
        let gates = order
            .iter()
            .map(|&i| {
                let g = &circuit.gates[i];
                let mut accept = vec![false; g.modulus as usize];
                for &a in &g.accept {
                    accept[a as usize] = true;
                }
                let wires = g
                    .wires
                    .iter()
                    .filter(|w| w.mult % g.modulus != 0)
                    .map(|w| {
                        let slot = match w.src {
                            Source::Input(i) => i,
                            Source::Const(i) => circuit.num_inputs + i,
                            Source::Gate(id) => slot_of[&id],
                        };
                        (slot as u32, w.mult % g.modulus)
                    })
                    .collect();
                CompiledGate { modulus: g.modulus, accept, wires }
            })
            .collect();
        Ok(Self {
            num_inputs: circuit.num_inputs,
            constants: circuit.constants.clone(),
            gates,
            gate_ids: order.iter().map(|&i| circuit.gates[i].id).collect(),
            output_slot: slot_of[&circuit.output],
        })
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn size(&self) -> usize {
        self.gates.len()
    }

    pub fn scratch(&self) -> Vec<bool> {
        vec![false; self.num_inputs + self.constants.len() + self.gates.len()]
    }

    fn run(&self, vals: &mut [bool]) {
        let base = self.num_inputs + self.constants.len();
        vals[self.num_inputs..base].copy_from_slice(&self.constants);
        for (k, g) in self.gates.iter().enumerate() {
            let mut s = 0u64;
            for &(slot, mult) in &g.wires {
                if vals[slot as usize] {
                    s += mult;
                }
            }
            vals[base + k] = g.accept[(s % g.modulus) as usize];
        }
    }

    pub fn eval(&self, bits: &[bool]) -> Result<bool, CircuitError> {
        if bits.len() != self.num_inputs {
            return Err(CircuitError::ArityMismatch { expected: self.num_inputs, got: bits.len() });
        }
        let mut vals = self.scratch();
        vals[..self.num_inputs].copy_from_slice(bits);
        self.run(&mut vals);
        Ok(vals[self.output_slot])
    }

    /// Evaluate on the assignment whose bit `i` is `x_{i+1}`, reusing `scratch`.
    pub fn eval_mask(&self, mask: u64, scratch: &mut [bool]) -> bool {
        for (i, v) in scratch[..self.num_inputs].iter_mut().enumerate() {
            *v = mask >> i & 1 == 1;
        }
        self.run(scratch);
        scratch[self.output_slot]
    }

    /// Every gate's output, keyed by gate id.
    pub fn eval_gates(&self, bits: &[bool]) -> Result<HashMap<GateId, bool>, CircuitError> {
        if bits.len() != self.num_inputs {
            return Err(CircuitError::ArityMismatch { expected: self.num_inputs, got: bits.len() });
        }
        let mut vals = self.scratch();
        vals[..self.num_inputs].copy_from_slice(bits);
        self.run(&mut vals);
        let base = self.num_inputs + self.constants.len();
        Ok(self.gate_ids.iter().enumerate().map(|(k, &id)| (id, vals[base + k])).collect())
    }

    /// Value of any source under the given gate outputs.
    pub fn source_value(&self, src: Source, bits: &[bool], gates: &HashMap<GateId, bool>) -> bool {
        match src {
            Source::Input(i) => bits[i],
            Source::Const(i) => self.constants[i],
            Source::Gate(id) => gates[&id],
        }
    }

    /// The full truth table, indexed by assignment mask.
    pub fn truth_table(&self) -> Vec<bool> {
        let n = self.num_inputs;
        exec::map_collect_with(0..1u64 << n, || self.scratch(), |s, m| self.eval_mask(m, s))
    }
}

/// Exhaustive truth table with an arity guard.
pub fn truth_table(circuit: &LayeredCircuit, guard: usize) -> Result<Vec<bool>, CircuitError> {
    if circuit.num_inputs > guard {
        return Err(CircuitError::GuardExceeded { n: circuit.num_inputs, guard });
    }
    Ok(circuit.compile()?.truth_table())
}

/// First assignment (in mask order) on which `circuit` and `f` disagree.
pub fn find_disagreement<F>(circuit: &CompiledCircuit, f: F) -> Option<u64>
where
    F: Fn(u64) -> bool + Sync + Send,
{
    exec::find_first_with(0..1u64 << circuit.num_inputs(), || circuit.scratch(), |s, m| {
        circuit.eval_mask(m, s) != f(m)
    })
}

/// Whether the circuit computes `AND_n`, checked on all `2^n` inputs.
pub fn computes_and(circuit: &CompiledCircuit) -> bool {
    let n = circuit.num_inputs();
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    find_disagreement(circuit, move |m| m == full).is_none()
}

pub(crate) fn sorted_accept(accept: impl IntoIterator<Item = u64>) -> Vec<u64> {
    accept.into_iter().collect::<BTreeSet<_>>().into_iter().collect()
}

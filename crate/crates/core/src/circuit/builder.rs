use std::collections::HashMap;

use super::{sorted_accept, GateId, LayeredCircuit, ModGate, Source, Wire};
use crate::zpq::ZpqExpression;

/// Weighted gate outputs whose sum, taken modulo `ty`, carries one value.
///
/// `ty == None` marks a plain boolean source (a single wire of multiplicity
/// one), which may feed a gate of any modulus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    pub members: Vec<(Source, u64)>,
    pub ty: Option<u64>,
}

impl Bundle {
    pub fn plain(src: Source) -> Self {
        Self { members: vec![(src, 1)], ty: None }
    }

    pub fn typed(members: Vec<(Source, u64)>, ty: u64) -> Self {
        Self { members, ty: Some(ty) }
    }

    /// The bundle sum under the given source valuation.
    pub fn sum(&self, value: impl Fn(Source) -> bool) -> u64 {
        let total: u64 = self.members.iter().filter(|(s, _)| value(*s)).map(|&(_, m)| m).sum();
        match self.ty {
            Some(q) => total % q,
            None => total,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CircuitBuilder {
    num_inputs: usize,
    constants: Vec<bool>,
    levels: Vec<u64>,
    gates: Vec<ModGate>,
    const_slot: [Option<usize>; 2],
}

impl CircuitBuilder {
    pub fn new(num_inputs: usize, levels: Vec<u64>) -> Self {
        Self { num_inputs, constants: Vec::new(), levels, gates: Vec::new(), const_slot: [None; 2] }
    }

    pub fn input(&self, i: usize) -> Source {
        assert!(i < self.num_inputs);
        Source::Input(i)
    }

    /// A constant slot holding `value`; one slot per value is shared.
    pub fn constant(&mut self, value: bool) -> Source {
        let idx = value as usize;
        let slot = *self.const_slot[idx].get_or_insert_with(|| {
            self.constants.push(value);
            self.constants.len() - 1
        });
        Source::Const(slot)
    }

    pub fn num_gates(&self) -> usize {
        self.gates.len()
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Add a gate. Wires to the same source are merged and multiplicities
    /// reduced modulo `modulus`; vanishing wires are dropped.
    pub fn add_gate(
        &mut self,
        level: usize,
        modulus: u64,
        accept: impl IntoIterator<Item = u64>,
        wires: impl IntoIterator<Item = (Source, u64)>,
    ) -> GateId {
        let id = GateId(self.gates.len() as u32);
        self.gates.push(ModGate {
            id,
            level,
            modulus,
            accept: sorted_accept(accept),
            wires: merge_wires(wires, modulus),
        });
        id
    }

    /// Lower the terms of `expr` into a bunch of `MOD_p` gates on `level`.
    ///
    /// Input `i` of the expression is fed by `inputs[i]`, inflated so the gate
    /// sees the bundle sum. Returns the output bundle, of type `q`.
    pub fn add_bunch(&mut self, level: usize, expr: &ZpqExpression, inputs: &[Bundle]) -> Bundle {
        let (p, q) = (expr.p(), expr.q());
        assert_eq!(inputs.len(), expr.arity(), "bunch arity mismatch");
        for b in inputs {
            assert!(b.ty.is_none() || b.ty == Some(p), "bundle of type {:?} fed to MOD_{p} bunch", b.ty);
        }
        let mut members = Vec::with_capacity(expr.len());
        for term in expr.terms() {
            let wires = term.beta.iter().zip(inputs).filter(|(&b, _)| b != 0).flat_map(|(&b, bundle)| {
                bundle.members.iter().map(move |&(src, mult)| (src, b as u64 * mult))
            });
            let reject = (p - term.c as u64) % p;
            let gate = self.add_gate(level, p, (0..p).filter(|&v| v != reject), wires);
            members.push((Source::Gate(gate), term.alpha));
        }
        Bundle::typed(members, q)
    }

    pub fn finish(self, output: GateId, origin: Option<serde_json::Value>) -> LayeredCircuit {
        LayeredCircuit {
            num_inputs: self.num_inputs,
            constants: self.constants,
            levels: self.levels,
            gates: self.gates,
            output,
            origin,
        }
    }
}

pub(crate) fn merge_wires(wires: impl IntoIterator<Item = (Source, u64)>, modulus: u64) -> Vec<Wire> {
    let mut index: HashMap<Source, usize> = HashMap::new();
    let mut out: Vec<Wire> = Vec::new();
    for (src, mult) in wires {
        let mult = mult % modulus;
        match index.get(&src) {
            Some(&i) => out[i].mult = (out[i].mult + mult) % modulus,
            None => {
                index.insert(src, out.len());
                out.push(Wire { src, mult });
            }
        }
    }
    out.retain(|w| w.mult != 0);
    out
}

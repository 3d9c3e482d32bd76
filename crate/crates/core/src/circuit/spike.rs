use super::{CircuitError, LayeredCircuit, Source};
use crate::circuit::Assignment;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpikeMode {
    /// Compute `1 - f`.
    Complement,
    /// Compute `x -> f(x + from - to)`, moving a spike at `from` to `to`.
    Translate { from: Assignment, to: Assignment },
}

/// Rewrite accept sets (and level-1 multiplicities) only; size is unchanged.
pub fn spike_transform(circuit: &LayeredCircuit, mode: &SpikeMode) -> Result<LayeredCircuit, CircuitError> {
    circuit.validate()?;
    let mut out = circuit.clone();
    match mode {
        SpikeMode::Complement => {
            let g = out.gates.iter_mut().find(|g| g.id == out.output).expect("validated output");
            g.accept = (0..g.modulus).filter(|v| g.accept.binary_search(v).is_err()).collect();
        }
        SpikeMode::Translate { from, to } => {
            for t in [from, to] {
                if t.len() != circuit.num_inputs {
                    return Err(CircuitError::SpikeArity { expected: circuit.num_inputs, got: t.len() });
                }
            }
            let flip: Vec<bool> = from.0.iter().zip(&to.0).map(|(a, b)| a != b).collect();
            for g in out.gates.iter_mut().filter(|g| g.level == 1) {
                // mu * (1 - x) = mu + (g - mu) * x
                let mut shift = 0;
                for w in &mut g.wires {
                    if let Source::Input(i) = w.src {
                        let mu = w.mult % g.modulus;
                        if flip[i] && mu != 0 {
                            shift = (shift + mu) % g.modulus;
                            w.mult = g.modulus - mu;
                        }
                    }
                }
                if shift != 0 {
                    let m = g.modulus;
                    let mut acc: Vec<u64> = g.accept.iter().map(|&a| (a + m - shift) % m).collect();
                    acc.sort_unstable();
                    g.accept = acc;
                }
            }
        }
    }
    Ok(out)
}

//! Seeded random circuits for cross-checking.

use rand::seq::IndexedRandom;
use rand::Rng;

use super::{CircuitBuilder, GateId, LayeredCircuit, Source};

#[derive(Debug, Clone)]
pub struct RandomCircuitParams {
    pub num_inputs: usize,
    /// Level moduli; the top level holds only the output gate.
    pub levels: Vec<u64>,
    pub max_gates_per_level: usize,
    pub max_fanin: usize,
    /// Probability of wiring a constant slot into a level-1 gate.
    pub constant_rate: f64,
}

impl RandomCircuitParams {
    pub fn new(num_inputs: usize, levels: Vec<u64>) -> Self {
        Self { num_inputs, levels, max_gates_per_level: 4, max_fanin: 4, constant_rate: 0.2 }
    }
}

fn divisors_at_least_two(m: u64) -> Vec<u64> {
    (2..=m).filter(|d| m.is_multiple_of(*d)).collect()
}

pub fn random_circuit<R: Rng + ?Sized>(rng: &mut R, params: &RandomCircuitParams) -> LayeredCircuit {
    let h = params.levels.len();
    assert!(h >= 1, "need at least one level");
    let mut b = CircuitBuilder::new(params.num_inputs, params.levels.clone());
    let mut prev: Vec<Source> = (0..params.num_inputs).map(Source::Input).collect();
    let mut output = GateId(0);
    for (li, &m) in params.levels.iter().enumerate() {
        let level = li + 1;
        let count = if level == h { 1 } else { rng.random_range(1..=params.max_gates_per_level.max(1)) };
        let moduli = divisors_at_least_two(m);
        let mut cur = Vec::with_capacity(count);
        for _ in 0..count {
            let g = *moduli.choose(rng).expect("modulus >= 2");
            let mut wires = Vec::new();
            if !prev.is_empty() {
                let fanin = rng.random_range(1..=params.max_fanin.max(1));
                for _ in 0..fanin {
                    let src = *prev.choose(rng).unwrap();
                    wires.push((src, rng.random_range(1..g)));
                }
            }
            if level == 1 && rng.random_bool(params.constant_rate) {
                let v = rng.random_bool(0.5);
                let slot = b.constant(v);
                wires.push((slot, rng.random_range(1..g)));
            }
            let accept: Vec<u64> = (0..g).filter(|_| rng.random_bool(0.5)).collect();
            let id = b.add_gate(level, g, accept, wires);
            cur.push(Source::Gate(id));
            output = id;
        }
        prev = cur;
    }
    b.finish(output, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::validate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_circuits_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for levels in [vec![4, 4], vec![6, 2, 3], vec![2]] {
            for _ in 0..50 {
                let c = random_circuit(&mut rng, &RandomCircuitParams::new(5, levels.clone()));
                assert!(validate(&c).is_empty());
                assert_eq!(c.depth(), levels.len());
            }
        }
    }
}

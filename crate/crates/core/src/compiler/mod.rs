//! AND and 3-CNF circuit constructions.

mod deep;
mod depth2;

pub use deep::{check_bundle_invariants, deep_and, DeepBuild, InvariantReport, TracedBundle};
pub use depth2::{chain_and, depth2_and, depth2_and_size, depth2_cnf_circuit, depth2_plan, recursive_and, Depth2Plan};

use serde::Serialize;
use thiserror::Error;

use crate::circuit::Modulus;
use crate::gf::integer_root;
use crate::zpq::ZpqError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("modulus {m} has {omega} distinct prime factors, at least 2 required")]
    Omega { m: u64, omega: usize },
    #[error("depth {h} is below the minimum {min}")]
    Depth { h: usize, min: usize },
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("adjacent primes at positions {0} and {next} are equal", next = .0 + 1)]
    AdjacentEqual(usize),
    #[error("arity must be at least 1")]
    EmptyArity,
    #[error("padded arity {0} exceeds the input limit")]
    TooManyInputs(u128),
    #[error(transparent)]
    Expression(#[from] ZpqError),
}

/// Least `ν ≥ 1` with `p^ν > ⌊x^{1/e}⌋`, so that
/// `p^{ν-1} ≤ x^{1/e} < p^ν`.
pub fn bracket_exponent(p: u64, x: u64, e: u32) -> u32 {
    let r = integer_root(x, e);
    let mut nu = 1;
    let mut pw = p as u128;
    while pw <= r as u128 {
        pw *= p as u128;
        nu += 1;
    }
    nu
}

/// The primes of `m` in the given order with bracketed exponents, raised
/// until `check` accepts them.
pub(crate) fn exponents_with_check(
    primes: &[u64],
    x: u64,
    e: u32,
    check: impl Fn(&[u32]) -> bool,
) -> Vec<u32> {
    let mut nu: Vec<u32> = primes.iter().map(|&p| bracket_exponent(p, x, e)).collect();
    let mut i = 0;
    let len = nu.len();
    while !check(&nu) {
        nu[i % len] += 1;
        i += 1;
    }
    nu
}

pub(crate) fn prime_power_product(primes: &[u64], nu: &[u32], skip: Option<usize>) -> u128 {
    primes
        .iter()
        .zip(nu)
        .enumerate()
        .filter(|&(j, _)| Some(j) != skip)
        .fold(1u128, |acc, (_, (&p, &v))| acc.saturating_mul((p as u128).saturating_pow(v)))
}

/// Parameters of a deep build, recorded for inspection and provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConstructionPlan {
    pub modulus: u64,
    pub factors: Vec<(u64, u32)>,
    pub depth: usize,
    pub synchronized: bool,
    /// Distinct primes, decreasing.
    pub primes: Vec<u64>,
    pub omega: usize,
    pub varpi: usize,
    pub arity: usize,
    pub padded_arity: u64,
    pub k: u64,
    pub k_omega: u64,
    pub k_varpi: u64,
    pub k0: Option<u64>,
    /// Exponents aligned with `primes`; `nu_bar` covers the large primes only.
    pub nu: Vec<u32>,
    pub nu_bar: Vec<u32>,
    pub nu0: Vec<u32>,
    /// `q_sets[i]`: target primes for type `primes[i]` on level `h - 1`.
    pub q_sets: Vec<Vec<u64>>,
    /// `z_sets[j]`: source indices feeding large prime `primes[j]` on level `h - 1`.
    pub z_sets: Vec<Vec<usize>>,
    pub sigma: u64,
    pub bundles_per_level: Vec<usize>,
}

/// Whether `(z_j) ↦ Σ (m/p_j)·z_j` is injective on `∏ Z_{p_j}`.
pub fn direct_sum_injective(m: u64) -> bool {
    let primes = Modulus::new(m).primes();
    let total: u64 = primes.iter().product();
    let mut seen = vec![false; m as usize];
    for idx in 0..total {
        let mut rest = idx;
        let mut s = 0;
        for &p in &primes {
            let z = rest % p;
            rest /= p;
            s = (s + (m / p) * z) % m;
        }
        if std::mem::replace(&mut seen[s as usize], true) {
            return false;
        }
    }
    true
}

pub(crate) fn require_omega(m: u64) -> Result<Modulus, CompileError> {
    let md = Modulus::new(m);
    if md.omega() < 2 {
        return Err(CompileError::Omega { m, omega: md.omega() });
    }
    Ok(md)
}

/// Guard on padded arity: circuits address inputs with `usize` and
/// exhaustive checks need masks.
pub(crate) const MAX_PADDED_ARITY: u128 = 1 << 20;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracketing_is_exact() {
        for p in [2u64, 3, 5, 7] {
            for e in 1..=3u32 {
                for x in 0..2000u64 {
                    let nu = bracket_exponent(p, x, e);
                    let lo = (p as f64).powi(nu as i32 - 1);
                    let hi = (p as f64).powi(nu as i32);
                    let root = (x as f64).powf(1.0 / e as f64);
                    if x >= 1 {
                        assert!(lo <= root + 1e-9 && root < hi, "p={p} x={x} e={e} nu={nu}");
                    }
                }
            }
        }
    }

    #[test]
    fn direct_sums_inject() {
        for m in 2..=210 {
            assert!(direct_sum_injective(m), "m={m}");
        }
    }
}

use std::collections::HashMap;

use serde_json::json;

use super::{
    exponents_with_check, prime_power_product, require_omega, CompileError, ConstructionPlan, MAX_PADDED_ARITY,
};
use crate::circuit::{Bundle, CircuitBuilder, CompiledCircuit, LayeredCircuit, Source};
use crate::exec;
use crate::gf::ceil_root;
use crate::zpq::{pseudo_and_expr, ZpqExpression};

/// A bundle together with the level whose gates it collects (0 = inputs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TracedBundle {
    pub level: usize,
    pub bundle: Bundle,
}

#[derive(Debug, Clone)]
pub struct DeepBuild {
    pub circuit: LayeredCircuit,
    pub plan: ConstructionPlan,
    pub trace: Vec<TracedBundle>,
}

/// `t'_{pq} = 1 - t_{pq}` per `(p, q, arity, ν)`.
struct BunchCache(HashMap<(u64, u64, u64, u32), ZpqExpression>);

impl BunchCache {
    fn get(&mut self, p: u64, q: u64, arity: u64, nu: u32) -> Result<&ZpqExpression, CompileError> {
        let key = (p, q, arity, nu);
        if let std::collections::hash_map::Entry::Vacant(e) = self.0.entry(key) {
            let t = pseudo_and_expr(p, q, nu, arity as usize)?.complement();
            e.insert(t);
        }
        Ok(&self.0[&key])
    }
}

fn pow_checked(k: u64, e: usize) -> Result<u128, CompileError> {
    let v = (k as u128).checked_pow(e as u32).ok_or(CompileError::TooManyInputs(u128::MAX))?;
    if v > MAX_PADDED_ARITY {
        return Err(CompileError::TooManyInputs(v));
    }
    Ok(v)
}

/// Depth-`h` `CC_m` circuit for `AND_n`; `sync` selects the synchronized
/// first level, which raises the root degree by one.
pub fn deep_and(m: u64, h: usize, n: usize, sync: bool) -> Result<DeepBuild, CompileError> {
    if h < 3 {
        return Err(CompileError::Depth { h, min: 3 });
    }
    if n == 0 {
        return Err(CompileError::EmptyArity);
    }
    let md = require_omega(m)?;
    let mut primes = md.primes();
    primes.reverse();
    let w = primes.len();
    let wv = md.varpi();
    let exp = (w - 1) * (h - 2) + (wv - 1) + sync as usize;
    let k = ceil_root(n as u64, exp as u32).max(1);
    let padded = pow_checked(k, exp)? as u64;
    let k_omega = (w as u64 - 1) * k.pow(w as u32 - 1);
    let k_varpi = (w as u64 - 1) * k.pow(wv as u32 - 1);
    let k0 = sync.then(|| k.pow(w as u32));

    let nu = exponents_with_check(&primes, k_omega, w as u32 - 1, |nu| {
        (0..w).all(|i| prime_power_product(&primes, nu, Some(i)) > k_omega as u128)
    });
    // Q_p: the wv - 1 smallest large primes other than p
    let large = &primes[..wv];
    let q_sets: Vec<Vec<u64>> = primes
        .iter()
        .map(|&p| {
            let mut qs: Vec<u64> = large.iter().copied().filter(|&q| q != p).collect();
            qs.sort_unstable();
            qs.truncate(wv - 1);
            qs
        })
        .collect();
    let nu_bar = exponents_with_check(large, k_varpi, wv as u32 - 1, |nb| {
        q_sets.iter().all(|qs| {
            qs.iter()
                .map(|q| large.iter().position(|p| p == q).unwrap())
                .fold(1u128, |acc, j| acc.saturating_mul((large[j] as u128).saturating_pow(nb[j])))
                > k_varpi as u128
        })
    });
    let nu0 = if sync {
        let k0v = k0.unwrap() as u128;
        exponents_with_check(&primes, k, 1, |nv| prime_power_product(&primes, nv, None) > k0v)
    } else {
        Vec::new()
    };

    let idx_of: HashMap<u64, usize> = primes.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let mut b = CircuitBuilder::new(n, vec![m; h]);
    let mut inputs: Vec<Source> = (0..n).map(Source::Input).collect();
    if padded as usize > n {
        let one = b.constant(true);
        inputs.resize(padded as usize, one);
    }
    let mut trace: Vec<TracedBundle> = Vec::new();
    let mut cache = BunchCache(HashMap::new());

    // level 0: per type, every variable once (sync) or w - 1 times
    let copies = if sync { 1 } else { w - 1 };
    let mut by_type: Vec<Vec<Bundle>> = primes
        .iter()
        .map(|_| inputs.iter().flat_map(|&s| std::iter::repeat_n(Bundle::plain(s), copies)).collect())
        .collect();
    for bs in &by_type {
        trace.extend(bs.iter().map(|bd| TracedBundle { level: 0, bundle: bd.clone() }));
    }
    let mut bundles_per_level = vec![by_type.iter().map(Vec::len).sum()];

    let mut level = 1;
    let mut pass = |b: &mut CircuitBuilder,
                    by_type: &[Vec<Bundle>],
                    level: usize,
                    group: usize,
                    targets: &dyn Fn(usize) -> Vec<(u64, u32)>|
     -> Result<Vec<Vec<Bundle>>, CompileError> {
        let mut next: Vec<Vec<Bundle>> = vec![Vec::new(); w];
        for (i, bs) in by_type.iter().enumerate() {
            assert_eq!(bs.len() % group, 0, "type {} has {} bundles, group {group}", primes[i], bs.len());
            for chunk in bs.chunks(group) {
                for (q, nu_q) in targets(i) {
                    let expr = cache.get(primes[i], q, group as u64, nu_q)?;
                    let out = b.add_bunch(level, expr, chunk);
                    next[idx_of[&q]].push(out);
                }
            }
        }
        Ok(next)
    };

    let all_others = |nu: &[u32]| {
        let nu = nu.to_vec();
        let primes = primes.clone();
        move |i: usize| -> Vec<(u64, u32)> {
            (0..w).filter(|&j| j != i).map(|j| (primes[j], nu[j])).collect()
        }
    };

    if sync {
        by_type = pass(&mut b, &by_type, level, k0.unwrap() as usize, &all_others(&nu0))?;
        record(&mut trace, &mut bundles_per_level, &by_type, level);
        level += 1;
    }
    while level <= h - 2 {
        by_type = pass(&mut b, &by_type, level, k_omega as usize, &all_others(&nu))?;
        record(&mut trace, &mut bundles_per_level, &by_type, level);
        level += 1;
    }
    // level h - 1: large targets only
    let large_nu: HashMap<u64, u32> = large.iter().copied().zip(nu_bar.iter().copied()).collect();
    let qs_for = |i: usize| -> Vec<(u64, u32)> { q_sets[i].iter().map(|&q| (q, large_nu[&q])).collect() };
    by_type = pass(&mut b, &by_type, h - 1, k_varpi as usize, &qs_for)?;
    record(&mut trace, &mut bundles_per_level, &by_type, h - 1);

    let z_sets: Vec<Vec<usize>> = (0..wv)
        .map(|j| (0..w).filter(|&i| q_sets[i].contains(&primes[j])).collect())
        .collect();
    let sigma = (0..wv).fold(0, |s, j| (s + (m / primes[j]) * z_sets[j].len() as u64) % m);
    let mut wires = Vec::new();
    for (j, bs) in by_type.iter().enumerate() {
        debug_assert!(j < wv || bs.is_empty());
        let scale = m / primes[j];
        for bd in bs {
            wires.extend(bd.members.iter().map(|&(s, a)| (s, scale * a)));
        }
    }
    let out = b.add_gate(h, m, [sigma], wires);

    let plan = ConstructionPlan {
        modulus: m,
        factors: md.factors().to_vec(),
        depth: h,
        synchronized: sync,
        primes: primes.clone(),
        omega: w,
        varpi: wv,
        arity: n,
        padded_arity: padded,
        k,
        k_omega,
        k_varpi,
        k0,
        nu,
        nu_bar,
        nu0,
        q_sets,
        z_sets,
        sigma,
        bundles_per_level,
    };
    let origin = json!({"builder": "deep_and", "m": m, "h": h, "n": n, "sync": sync, "plan": plan});
    Ok(DeepBuild { circuit: b.finish(out, Some(origin)), plan, trace })
}

fn record(trace: &mut Vec<TracedBundle>, counts: &mut Vec<usize>, by_type: &[Vec<Bundle>], level: usize) {
    for bs in by_type {
        trace.extend(bs.iter().map(|bd| TracedBundle { level, bundle: bd.clone() }));
    }
    counts.push(by_type.iter().map(Vec::len).sum());
}

/// Outcome of evaluating every traced bundle on every input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantReport {
    pub assignments: u64,
    pub bundles: usize,
    /// Inputs on which some bundle sum left `{0, 1}`.
    pub non_boolean: u64,
    /// Inputs on which the conjunction of some level's bundle sums differed
    /// from `AND`.
    pub conjunction_mismatch: u64,
}

impl InvariantReport {
    pub fn holds(&self) -> bool {
        self.non_boolean == 0 && self.conjunction_mismatch == 0
    }
}

pub fn check_bundle_invariants(build: &DeepBuild) -> Result<InvariantReport, crate::circuit::CircuitError> {
    let compiled = CompiledCircuit::new(&build.circuit)?;
    let n = build.circuit.num_inputs;
    if n > 24 {
        return Err(crate::circuit::CircuitError::GuardExceeded { n, guard: 24 });
    }
    let full = (1u64 << n) - 1;
    let max_level = build.trace.iter().map(|t| t.level).max().unwrap_or(0);
    let check = |mask: u64| -> (bool, bool) {
        let bits: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        let gates = compiled.eval_gates(&bits).expect("arity matches");
        let mut non_boolean = false;
        let mut level_and = vec![true; max_level + 1];
        for t in &build.trace {
            let s = t.bundle.sum(|src| compiled.source_value(src, &bits, &gates));
            if s > 1 {
                non_boolean = true;
            }
            level_and[t.level] &= s == 1;
        }
        let want = mask == full;
        (non_boolean, level_and.iter().any(|&v| v != want))
    };
    let non_boolean = exec::count(0..1u64 << n, |m| check(m).0);
    let conjunction_mismatch = exec::count(0..1u64 << n, |m| check(m).1);
    Ok(InvariantReport { assignments: 1 << n, bundles: build.trace.len(), non_boolean, conjunction_mismatch })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::computes_and;

    #[test]
    fn plan_for_six() {
        let d = deep_and(6, 3, 4, false).unwrap();
        assert_eq!(d.plan.primes, vec![3, 2]);
        assert_eq!((d.plan.k, d.plan.k_omega, d.plan.k_varpi), (2, 2, 2));
        assert_eq!(d.plan.q_sets, vec![vec![2], vec![3]]);
        assert_eq!(d.plan.z_sets, vec![vec![1], vec![0]]);
        assert_eq!(d.plan.sigma, 5);
        assert_eq!(d.plan.bundles_per_level, vec![8, 4, 2]);
        assert!(computes_and(&d.circuit.compile().unwrap()));
    }

    #[test]
    fn synchronized_plan() {
        let d = deep_and(6, 3, 8, true).unwrap();
        assert_eq!(d.plan.k0, Some(4));
        assert_eq!(d.plan.nu0, vec![1, 2]);
        assert_eq!(d.plan.bundles_per_level, vec![16, 4, 2]);
        let r = check_bundle_invariants(&d).unwrap();
        assert!(r.holds(), "{r:?}");
    }

    #[test]
    fn rejects_shallow_or_prime_power() {
        assert!(matches!(deep_and(6, 2, 4, false), Err(CompileError::Depth { .. })));
        assert!(matches!(deep_and(9, 3, 4, false), Err(CompileError::Omega { .. })));
    }
}

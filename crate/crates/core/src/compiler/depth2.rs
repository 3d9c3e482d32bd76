use std::collections::HashMap;

use serde::Serialize;
use serde_json::json;

use super::{exponents_with_check, prime_power_product, require_omega, CompileError, MAX_PADDED_ARITY};
use crate::circuit::{Bundle, CircuitBuilder, GateId, LayeredCircuit, Source};
use crate::cnf::{CnfFormula, Lit};
use crate::gf::{ceil_root, is_prime};
use crate::zpq::{cnf_pseudo_expr, conjunction_expr, pseudo_and_expr, pseudo_and_len, ZpqExpression};

/// Depth-2 parameters: expression `j` is a `Z[inner_j, primes_j]`-expression
/// with `inner_j = primes_{j-1}` read cyclically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Depth2Plan {
    pub modulus: u64,
    /// Distinct primes, increasing.
    pub primes: Vec<u64>,
    pub nu: Vec<u32>,
    pub clauses: usize,
}

impl Depth2Plan {
    pub fn inner(&self, j: usize) -> u64 {
        let w = self.primes.len();
        self.primes[(j + w - 1) % w]
    }
}

pub fn depth2_plan(m: u64, clauses: usize) -> Result<Depth2Plan, CompileError> {
    let md = require_omega(m)?;
    let primes = md.primes();
    let w = primes.len() as u32;
    let l = clauses as u128;
    let nu = exponents_with_check(&primes, clauses as u64, w, |nu| prime_power_product(&primes, nu, None) > l);
    Ok(Depth2Plan { modulus: m, primes, nu, clauses })
}

/// Lower the expressions on `level` and sum them into `MOD_m^{0}` on
/// `level + 1`, scaling expression `j` by `m / p_j`.
fn emit_depth2(
    b: &mut CircuitBuilder,
    level: usize,
    inputs: &[Bundle],
    plan: &Depth2Plan,
    exprs: &[ZpqExpression],
) -> GateId {
    let m = plan.modulus;
    let mut wires = Vec::new();
    for (j, t) in exprs.iter().enumerate() {
        let scale = m / plan.primes[j];
        let bundle = b.add_bunch(level, t, inputs);
        wires.extend(bundle.members.into_iter().map(|(s, a)| (s, scale * a)));
    }
    b.add_gate(level + 1, m, [0], wires)
}

fn and_exprs(plan: &Depth2Plan, n: usize) -> Result<Vec<ZpqExpression>, CompileError> {
    (0..plan.primes.len())
        .map(|j| Ok(pseudo_and_expr(plan.inner(j), plan.primes[j], plan.nu[j], n)?))
        .collect()
}

/// Depth-2 `CC_m` circuit that outputs 1 exactly on satisfying assignments.
pub fn depth2_cnf_circuit(phi: &CnfFormula, m: u64) -> Result<LayeredCircuit, CompileError> {
    let plan = depth2_plan(m, phi.num_clauses())?;
    let exprs = (0..plan.primes.len())
        .map(|j| Ok(cnf_pseudo_expr(phi, plan.inner(j), plan.primes[j], plan.nu[j])?))
        .collect::<Result<Vec<_>, CompileError>>()?;
    let mut b = CircuitBuilder::new(phi.num_vars, vec![m, m]);
    let inputs: Vec<Bundle> = (0..phi.num_vars).map(|i| Bundle::plain(Source::Input(i))).collect();
    let out = emit_depth2(&mut b, 1, &inputs, &plan, &exprs);
    let origin = json!({
        "builder": "depth2_cnf",
        "m": m,
        "num_vars": phi.num_vars,
        "clauses": phi.num_clauses(),
        "plan": plan,
        "expression_terms": exprs.iter().map(ZpqExpression::len).collect::<Vec<_>>(),
    });
    Ok(b.finish(out, Some(origin)))
}

/// Depth-2 `CC_m` circuit for `AND_n`.
pub fn depth2_and(m: u64, n: usize) -> Result<LayeredCircuit, CompileError> {
    if n == 0 {
        return Err(CompileError::EmptyArity);
    }
    let plan = depth2_plan(m, n)?;
    let exprs = and_exprs(&plan, n)?;
    let mut b = CircuitBuilder::new(n, vec![m, m]);
    let inputs: Vec<Bundle> = (0..n).map(|i| Bundle::plain(Source::Input(i))).collect();
    let out = emit_depth2(&mut b, 1, &inputs, &plan, &exprs);
    let origin = json!({"builder": "depth2_and", "m": m, "n": n, "plan": plan});
    Ok(b.finish(out, Some(origin)))
}

/// Gate count of [`depth2_and`] computed without building it.
pub fn depth2_and_size(m: u64, n: usize) -> Result<u128, CompileError> {
    if n == 0 {
        return Err(CompileError::EmptyArity);
    }
    let plan = depth2_plan(m, n)?;
    let mut total = 1u128;
    for j in 0..plan.primes.len() {
        total += pseudo_and_len(plan.inner(j), plan.primes[j], plan.nu[j], n)?;
    }
    Ok(total)
}

fn padded_inputs(b: &mut CircuitBuilder, n: usize, padded: u128) -> Result<Vec<Source>, CompileError> {
    if padded > MAX_PADDED_ARITY {
        return Err(CompileError::TooManyInputs(padded));
    }
    let mut v: Vec<Source> = (0..n).map(Source::Input).collect();
    if (padded as usize) > n {
        let one = b.constant(true);
        v.resize(padded as usize, one);
    }
    Ok(v)
}

/// `AND_n` from `k`-ary depth-2 blocks stacked `⌊h/2⌋` times.
pub fn recursive_and(m: u64, n: usize, h: usize) -> Result<LayeredCircuit, CompileError> {
    if h < 2 {
        return Err(CompileError::Depth { h, min: 2 });
    }
    if n == 0 {
        return Err(CompileError::EmptyArity);
    }
    require_omega(m)?;
    let blocks = h / 2;
    let k = ceil_root(n as u64, blocks as u32).max(1) as usize;
    let padded = (k as u128).pow(blocks as u32);
    let plan = depth2_plan(m, k)?;
    let exprs = and_exprs(&plan, k)?;
    let mut b = CircuitBuilder::new(n, vec![m; 2 * blocks]);
    let mut layer = padded_inputs(&mut b, n, padded)?;
    for blk in 0..blocks {
        let level = 2 * blk + 1;
        layer = layer
            .chunks(k)
            .map(|chunk| {
                let ins: Vec<Bundle> = chunk.iter().map(|&s| Bundle::plain(s)).collect();
                Source::Gate(emit_depth2(&mut b, level, &ins, &plan, &exprs))
            })
            .collect();
    }
    let out = match layer.as_slice() {
        [Source::Gate(g)] => *g,
        _ => unreachable!("blocks reduce k^blocks inputs to one gate"),
    };
    let origin = json!({
        "builder": "recursive_and", "m": m, "n": n, "h": h,
        "k": k, "blocks": blocks, "padded_arity": padded as u64, "plan": plan,
    });
    Ok(b.finish(out, Some(origin)))
}

/// `AND_n` over alternating primes `p_1, …, p_h`: `h - 1` levels of
/// `k`-ary AND bunches and a final `MOD_{p_h}^{1}` gate.
pub fn chain_and(primes: &[u64], n: usize) -> Result<LayeredCircuit, CompileError> {
    let h = primes.len();
    if h < 2 {
        return Err(CompileError::Depth { h, min: 2 });
    }
    if n == 0 {
        return Err(CompileError::EmptyArity);
    }
    if let Some(&p) = primes.iter().find(|&&p| !is_prime(p)) {
        return Err(CompileError::NotPrime(p));
    }
    if let Some(i) = primes.windows(2).position(|w| w[0] == w[1]) {
        return Err(CompileError::AdjacentEqual(i + 1));
    }
    let k = ceil_root(n as u64, (h - 1) as u32).max(1) as usize;
    let padded = (k as u128).pow((h - 1) as u32);
    let mut b = CircuitBuilder::new(n, primes.to_vec());
    let mut bundles: Vec<Bundle> = padded_inputs(&mut b, n, padded)?.into_iter().map(Bundle::plain).collect();
    let lits: Vec<Lit> = (0..k).map(|i| Lit::new(i, true)).collect();
    let mut cache: HashMap<(u64, u64), ZpqExpression> = HashMap::new();
    for j in 0..h - 1 {
        let key = (primes[j], primes[j + 1]);
        if let std::collections::hash_map::Entry::Vacant(e) = cache.entry(key) {
            e.insert(conjunction_expr(key.0, key.1, k, &lits)?);
        }
        let expr = &cache[&key];
        bundles = bundles.chunks(k).map(|chunk| b.add_bunch(j + 1, expr, chunk)).collect();
    }
    debug_assert_eq!(bundles.len(), 1);
    let last = bundles.pop().expect("one bundle remains");
    let out = b.add_gate(h, primes[h - 1], [1], last.members);
    let origin = json!({"builder": "chain_and", "primes": primes, "n": n, "k": k, "padded_arity": padded as u64});
    Ok(b.finish(out, Some(origin)))
}

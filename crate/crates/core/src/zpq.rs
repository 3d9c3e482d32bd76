//! Expressions `t(x) = Σ α·b(β·x + c)` with inner arithmetic mod `p`, outer
//! mod `q`, and `b(0) = 0`, `b(v) = 1` otherwise.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use serde_json::json;
use thiserror::Error;

use crate::circuit::{Bundle, CircuitBuilder, LayeredCircuit};
use crate::cnf::{CnfFormula, Lit};
use crate::counting::counting_poly;
use crate::gf::{
    index_of_point, is_prime, lucas_binomial, mod_add, mod_inv, mod_mul, mod_neg, mod_pow, point_of_index,
    solve_gf_system, AffineForm, FunctionTable, GfError,
};

/// Largest `q^ν` accepted by the pseudo-AND builders.
pub const PSEUDO_AND_GUARD: u64 = 32;
/// Largest arity for the `p = 2` closed form.
pub const BINARY_SYNTH_MAX_ARITY: usize = 24;
/// Largest `p^n` synthesized by a dense linear solve.
pub const LINEAR_SOLVE_LIMIT: u64 = 81;
/// Largest `p^n` synthesized for odd `p`.
pub const ODD_SYNTH_LIMIT: u64 = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ZpqError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("inner and outer primes must differ (both {0})")]
    EqualPrimes(u64),
    #[error("expression has arity {expected}, got {got} arguments")]
    Arity { expected: usize, got: usize },
    #[error("{what} = {value} exceeds the guard {limit}")]
    Guard { what: &'static str, value: u64, limit: u64 },
    #[error("no boolean expansion of a {s}-ary conjunction over Z[{p},{q}]")]
    NoExpansion { p: u64, q: u64, s: usize },
    #[error("literal index {index} out of range for arity {arity}")]
    Literal { index: usize, arity: usize },
    #[error(transparent)]
    Gf(#[from] GfError),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    pub beta: Vec<u32>,
    pub c: u32,
    pub alpha: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZpqExpression {
    p: u64,
    q: u64,
    n: usize,
    /// Sorted by `(beta, c)`, keys unique, `alpha != 0`.
    terms: Vec<Term>,
}

fn check_primes(p: u64, q: u64) -> Result<(), ZpqError> {
    for v in [p, q] {
        if !is_prime(v) {
            return Err(ZpqError::NotPrime(v));
        }
    }
    if p == q {
        return Err(ZpqError::EqualPrimes(p));
    }
    Ok(())
}

/// Collects terms and merges duplicate keys.
#[derive(Debug, Clone)]
pub(crate) struct Accumulator {
    p: u64,
    q: u64,
    n: usize,
    map: HashMap<(Vec<u32>, u32), u64>,
}

impl Accumulator {
    pub(crate) fn new(p: u64, q: u64, n: usize) -> Result<Self, ZpqError> {
        check_primes(p, q)?;
        Ok(Self { p, q, n, map: HashMap::new() })
    }

    pub(crate) fn add(&mut self, mut beta: Vec<u32>, c: u64, alpha: u64) {
        let alpha = alpha % self.q;
        if alpha == 0 {
            return;
        }
        for b in &mut beta {
            *b = (*b as u64 % self.p) as u32;
        }
        let mut c = c % self.p;
        if beta.iter().all(|&b| b == 0) {
            if c == 0 {
                return;
            }
            c = 1;
        }
        let q = self.q;
        let e = self.map.entry((beta, c as u32)).or_insert(0);
        *e = mod_add(*e, alpha, q);
    }

    /// Add `coef · ∧ lits` on the boolean domain.
    pub(crate) fn add_conjunction(&mut self, coef: u64, lits: &[Lit]) -> Result<(), ZpqError> {
        let coef = coef % self.q;
        if coef == 0 {
            return Ok(());
        }
        let lits = match normalize_conjunction(lits) {
            Some(l) => l,
            None => return Ok(()),
        };
        if let Some(l) = lits.iter().find(|l| l.var >= self.n) {
            return Err(ZpqError::Literal { index: l.var, arity: self.n });
        }
        let s = lits.len();
        let prof = and_profile(self.p, self.q, s)?;
        let (p, q) = (self.p, self.q);
        for sub in 0u64..1 << s {
            let t = sub.count_ones() as usize;
            let mut beta = vec![0u32; self.n];
            let mut neg = 0u64;
            for (i, l) in lits.iter().enumerate() {
                if sub >> i & 1 == 1 {
                    beta[l.var] = if l.positive { 1 } else { (p - 1) as u32 };
                    neg += !l.positive as u64;
                }
            }
            for c in 0..p {
                let a = prof[t][c as usize];
                if a != 0 {
                    self.add(beta.clone(), c + neg, mod_mul(a, coef, q));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn finish(self) -> ZpqExpression {
        let mut terms: Vec<Term> = self
            .map
            .into_iter()
            .filter(|&(_, a)| a != 0)
            .map(|((beta, c), alpha)| Term { beta, c, alpha })
            .collect();
        terms.sort();
        ZpqExpression { p: self.p, q: self.q, n: self.n, terms }
    }
}

/// Sort and deduplicate; `None` for a contradictory conjunction.
pub(crate) fn normalize_conjunction(lits: &[Lit]) -> Option<Vec<Lit>> {
    let mut v = lits.to_vec();
    v.sort();
    v.dedup();
    if v.windows(2).any(|w| w[0].var == w[1].var) {
        return None;
    }
    Some(v)
}

impl ZpqExpression {
    pub fn zero(p: u64, q: u64, n: usize) -> Result<Self, ZpqError> {
        check_primes(p, q)?;
        Ok(Self { p, q, n, terms: Vec::new() })
    }

    /// Build from `(β, c, α)` triples, reducing entries and merging keys.
    pub fn from_terms(
        p: u64,
        q: u64,
        n: usize,
        terms: impl IntoIterator<Item = (Vec<u32>, u32, u64)>,
    ) -> Result<Self, ZpqError> {
        let mut acc = Accumulator::new(p, q, n)?;
        for (beta, c, alpha) in terms {
            if beta.len() != n {
                return Err(ZpqError::Arity { expected: n, got: beta.len() });
            }
            acc.add(beta, c as u64, alpha);
        }
        Ok(acc.finish())
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// `|L(t)|`.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Gate count of the depth-2 circuit: `1 + |L(t)|`.
    pub fn size(&self) -> usize {
        1 + self.terms.len()
    }

    pub fn eval(&self, x: &[u64]) -> Result<u64, ZpqError> {
        if x.len() != self.n {
            return Err(ZpqError::Arity { expected: self.n, got: x.len() });
        }
        let mut acc = 0;
        for t in &self.terms {
            let mut s = t.c as u64;
            for (&b, &xi) in t.beta.iter().zip(x) {
                s = (s + b as u64 * (xi % self.p)) % self.p;
            }
            if s != 0 {
                acc = mod_add(acc, t.alpha, self.q);
            }
        }
        Ok(acc)
    }

    /// Evaluate on the boolean point whose bit `i` is `x_{i+1}`.
    pub fn eval_mask(&self, mask: u64) -> u64 {
        let mut acc = 0;
        for t in &self.terms {
            let mut s = t.c as u64;
            for (i, &b) in t.beta.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    s += b as u64;
                }
            }
            if !s.is_multiple_of(self.p) {
                acc = mod_add(acc, t.alpha, self.q);
            }
        }
        acc
    }

    fn accumulator(&self) -> Accumulator {
        let mut acc = Accumulator { p: self.p, q: self.q, n: self.n, map: HashMap::new() };
        for t in &self.terms {
            acc.add(t.beta.clone(), t.c as u64, t.alpha);
        }
        acc
    }

    /// `1 - t`.
    pub fn complement(&self) -> Self {
        let mut acc = Accumulator { p: self.p, q: self.q, n: self.n, map: HashMap::new() };
        for t in &self.terms {
            acc.add(t.beta.clone(), t.c as u64, mod_neg(t.alpha, self.q));
        }
        acc.add(vec![0; self.n], 1, 1);
        acc.finish()
    }

    pub fn plus(&self, other: &Self) -> Result<Self, ZpqError> {
        if (self.p, self.q) != (other.p, other.q) {
            return Err(ZpqError::EqualPrimes(other.p));
        }
        if self.n != other.n {
            return Err(ZpqError::Arity { expected: self.n, got: other.n });
        }
        let mut acc = self.accumulator();
        for t in &other.terms {
            acc.add(t.beta.clone(), t.c as u64, t.alpha);
        }
        Ok(acc.finish())
    }

    pub fn scaled(&self, k: u64) -> Self {
        let mut acc = Accumulator { p: self.p, q: self.q, n: self.n, map: HashMap::new() };
        for t in &self.terms {
            acc.add(t.beta.clone(), t.c as u64, mod_mul(t.alpha, k % self.q, self.q));
        }
        acc.finish()
    }

    pub fn summary_json(&self) -> serde_json::Value {
        json!({"p": self.p, "q": self.q, "arity": self.n, "terms": self.len()})
    }
}

type Profile = Arc<Vec<Vec<u64>>>;
type ProfileCache = Mutex<HashMap<(u64, u64, usize), Profile>>;

fn profile_cache() -> &'static ProfileCache {
    static CACHE: OnceLock<ProfileCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Coefficients `f[t][c]` such that for `z ∈ {0,1}^s`
/// `Σ_{B ⊆ [s]} Σ_c f[|B|][c]·b(Σ_{i∈B} z_i + c) = z_1 ⋯ z_s (mod q)`.
pub fn and_profile(p: u64, q: u64, s: usize) -> Result<Profile, ZpqError> {
    check_primes(p, q)?;
    if let Some(f) = profile_cache().lock().unwrap().get(&(p, q, s)) {
        return Ok(f.clone());
    }
    let mut f = vec![vec![0u64; p as usize]; s + 1];
    if s == 0 {
        f[0][1] = 1;
    } else if p == 2 {
        // ∏ z_i = -2^{1-s} Σ_{B≠∅} (-1)^{|B|} b(Σ_B z_i)
        let base = mod_neg(mod_pow(mod_inv(2, q), s as u64 - 1, q), q);
        for (t, row) in f.iter_mut().enumerate().skip(1) {
            row[0] = if t % 2 == 0 { base } else { mod_neg(base, q) };
        }
    } else {
        let cols = (s + 1) * p as usize;
        let mut a = vec![vec![0u64; cols]; s + 1];
        for (u, row) in a.iter_mut().enumerate() {
            for t in 0..=s {
                for c in 0..p {
                    let mut v = 0;
                    for k in t.saturating_sub(s - u)..=t.min(u) {
                        if !(k as u64 + c).is_multiple_of(p) {
                            let w = mod_mul(
                                lucas_binomial(q, u as u64, k as u64),
                                lucas_binomial(q, (s - u) as u64, (t - k) as u64),
                                q,
                            );
                            v = mod_add(v, w, q);
                        }
                    }
                    row[t * p as usize + c as usize] = v;
                }
            }
        }
        let mut rhs = vec![0u64; s + 1];
        rhs[s] = 1;
        let x = solve_gf_system(&a, &rhs, q)?.ok_or(ZpqError::NoExpansion { p, q, s })?;
        for (t, row) in f.iter_mut().enumerate() {
            for c in 0..p as usize {
                row[c] = x[t * p as usize + c];
            }
        }
    }
    let f = Arc::new(f);
    profile_cache().lock().unwrap().insert((p, q, s), f.clone());
    Ok(f)
}

/// An expression agreeing with `∧ lits` on `{0,1}^n`.
pub fn conjunction_expr(p: u64, q: u64, n: usize, lits: &[Lit]) -> Result<ZpqExpression, ZpqError> {
    let mut acc = Accumulator::new(p, q, n)?;
    acc.add_conjunction(1, lits)?;
    Ok(acc.finish())
}

fn pseudo_guard(q: u64, nu: u32) -> Result<u64, ZpqError> {
    let qn = q.checked_pow(nu).unwrap_or(u64::MAX);
    if nu == 0 || qn > PSEUDO_AND_GUARD {
        return Err(ZpqError::Guard { what: "q^nu", value: qn, limit: PSEUDO_AND_GUARD });
    }
    Ok(qn)
}

/// `coef[t][c]`: the coefficient every key `(B, c)` with `|B| = t` receives
/// in the pseudo-AND expression.
fn pseudo_and_coefficients(p: u64, q: u64, nu: u32, n: usize) -> Result<Vec<Vec<u64>>, ZpqError> {
    check_primes(p, q)?;
    let qn = pseudo_guard(q, nu)?;
    let w = counting_poly(q, nu, n as u64);
    let smax = n.min(qn as usize - 1);
    let mut coef = vec![vec![0u64; p as usize]; smax + 1];
    for s in 0..=smax {
        let a = w.coefficients()[s];
        if a == 0 {
            continue;
        }
        let prof = and_profile(p, q, s)?;
        for (t, row) in coef.iter_mut().enumerate().take(s + 1) {
            let mult = mod_mul(a, lucas_binomial(q, (n - t) as u64, (s - t) as u64), q);
            if mult == 0 {
                continue;
            }
            for c in 0..p as usize {
                row[c] = mod_add(row[c], mod_mul(mult, prof[t][c], q), q);
            }
        }
    }
    Ok(coef)
}

/// An expression with `t(a) = 0` iff the number of zeros of `a` is divisible
/// by `q^ν`, and `t(a) = 1` otherwise, for `a ∈ {0,1}^n`.
pub fn pseudo_and_expr(p: u64, q: u64, nu: u32, n: usize) -> Result<ZpqExpression, ZpqError> {
    let coef = pseudo_and_coefficients(p, q, nu, n)?;
    let mut acc = Accumulator::new(p, q, n)?;
    for (t, row) in coef.iter().enumerate() {
        if row.iter().all(|&a| a == 0) {
            continue;
        }
        for_each_subset(n, t, |mask| {
            let beta: Vec<u32> = (0..n).map(|i| (mask >> i & 1) as u32).collect();
            for (c, &a) in row.iter().enumerate() {
                acc.add(beta.clone(), c as u64, a);
            }
        });
    }
    Ok(acc.finish())
}

/// `|L(t)|` of [`pseudo_and_expr`] without materializing it.
pub fn pseudo_and_len(p: u64, q: u64, nu: u32, n: usize) -> Result<u128, ZpqError> {
    let coef = pseudo_and_coefficients(p, q, nu, n)?;
    let mut total = 0u128;
    let constant = coef[0].iter().enumerate().filter(|&(c, _)| c != 0).fold(0, |s, (_, &a)| mod_add(s, a, q));
    total += (constant != 0) as u128;
    for (t, row) in coef.iter().enumerate().skip(1) {
        let keys = row.iter().filter(|&&a| a != 0).count() as u128;
        total += keys * exact_binomial(n as u128, t as u128);
    }
    Ok(total)
}

fn exact_binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Calls `f` on every `n`-bit mask of popcount `t`, in increasing order.
pub(crate) fn for_each_subset(n: usize, t: usize, mut f: impl FnMut(u64)) {
    if t > n {
        return;
    }
    if t == 0 {
        f(0);
        return;
    }
    let mut v: u64 = (1u64 << t) - 1;
    let limit = 1u128 << n;
    while (v as u128) < limit {
        f(v);
        let c = v & v.wrapping_neg();
        let r = v + c;
        if r == 0 {
            break;
        }
        v = (((r ^ v) >> 2) / c) | r;
    }
}

/// A pseudo-expression counting unsatisfied clauses: on `a ∈ {0,1}^n`,
/// `t(a) = 0` iff that count is divisible by `q^ν`.
pub fn cnf_pseudo_expr(phi: &CnfFormula, p: u64, q: u64, nu: u32) -> Result<ZpqExpression, ZpqError> {
    check_primes(p, q)?;
    let qn = pseudo_guard(q, nu)?;
    let l = phi.clauses.len();
    let w = counting_poly(q, nu, l as u64);
    // each clause as a signed sum of conjunctions
    let parts: Vec<Vec<(u64, Vec<Lit>)>> = phi
        .clauses
        .iter()
        .map(|cl| match normalize_conjunction(cl) {
            None => vec![(1, vec![])],
            Some(lits) if lits.len() == 1 => vec![(1, lits)],
            Some(lits) => {
                let negated: Vec<Lit> = lits.iter().map(|l| l.negated()).collect();
                vec![(1, vec![]), (q - 1, negated)]
            }
        })
        .collect();
    let mut conj: BTreeMap<Vec<Lit>, u64> = BTreeMap::new();
    for j in 0..=l.min(qn as usize - 1) {
        let a = w.coefficients()[j];
        if a == 0 {
            continue;
        }
        for_each_subset(l, j, |mask| {
            let mut prod: Vec<(u64, Vec<Lit>)> = vec![(a, vec![])];
            for (i, part) in parts.iter().enumerate() {
                if mask >> i & 1 == 0 {
                    continue;
                }
                let mut next = Vec::with_capacity(prod.len() * part.len());
                for (c1, l1) in &prod {
                    for (c2, l2) in part {
                        let mut merged = l1.clone();
                        merged.extend_from_slice(l2);
                        if let Some(m) = normalize_conjunction(&merged) {
                            next.push((mod_mul(*c1, *c2, q), m));
                        }
                    }
                }
                prod = next;
            }
            for (c, lits) in prod {
                let e = conj.entry(lits).or_insert(0);
                *e = mod_add(*e, c, q);
            }
        });
    }
    let mut acc = Accumulator::new(p, q, phi.num_vars)?;
    for (lits, c) in conj {
        acc.add_conjunction(c, &lits)?;
    }
    Ok(acc.finish())
}

/// The product of `Z_2`-valued affine forms over `Z_2^n`, valid on the whole
/// domain.
pub fn affine_product_expr(q: u64, n: usize, forms: &[AffineForm]) -> Result<ZpqExpression, ZpqError> {
    check_primes(2, q)?;
    let s = forms.len();
    if s > BINARY_SYNTH_MAX_ARITY {
        return Err(ZpqError::Guard { what: "factor count", value: s as u64, limit: BINARY_SYNTH_MAX_ARITY as u64 });
    }
    for f in forms {
        if f.p != 2 {
            return Err(ZpqError::Gf(GfError::NotPrime(f.p)));
        }
        if f.arity() != n {
            return Err(ZpqError::Arity { expected: n, got: f.arity() });
        }
    }
    let mut acc = Accumulator::new(2, q, n)?;
    if s == 0 {
        acc.add(vec![0; n], 1, 1);
        return Ok(acc.finish());
    }
    let base = mod_neg(mod_pow(mod_inv(2, q), s as u64 - 1, q), q);
    for sub in 1u64..1 << s {
        let mut beta = vec![0u32; n];
        let mut c = 0u64;
        for (j, f) in forms.iter().enumerate() {
            if sub >> j & 1 == 1 {
                for (b, &fb) in beta.iter_mut().zip(&f.beta) {
                    *b ^= fb as u32 & 1;
                }
                c ^= f.c & 1;
            }
        }
        let alpha = if sub.count_ones() % 2 == 0 { base } else { mod_neg(base, q) };
        acc.add(beta, c, alpha);
    }
    Ok(acc.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisRoute {
    Auto,
    LinearSolve,
    ClosedForm,
}

/// An expression equal to `g` on all of `Z_p^n`.
pub fn synthesize(g: &FunctionTable) -> Result<ZpqExpression, ZpqError> {
    synthesize_with(g, SynthesisRoute::Auto)
}

pub fn synthesize_with(g: &FunctionTable, route: SynthesisRoute) -> Result<ZpqExpression, ZpqError> {
    let (p, q, n) = (g.p, g.q, g.n);
    check_primes(p, q)?;
    let size = p.checked_pow(n as u32).unwrap_or(u64::MAX);
    let route = match route {
        SynthesisRoute::Auto if p == 2 || size > LINEAR_SOLVE_LIMIT => SynthesisRoute::ClosedForm,
        SynthesisRoute::Auto => SynthesisRoute::LinearSolve,
        r => r,
    };
    match route {
        SynthesisRoute::LinearSolve => {
            if size > LINEAR_SOLVE_LIMIT {
                return Err(ZpqError::Guard { what: "p^n", value: size, limit: LINEAR_SOLVE_LIMIT });
            }
            synth_linear(g)
        }
        _ if p == 2 => {
            if n > BINARY_SYNTH_MAX_ARITY {
                return Err(ZpqError::Guard { what: "arity", value: n as u64, limit: BINARY_SYNTH_MAX_ARITY as u64 });
            }
            synth_binary(g)
        }
        _ => {
            if size > ODD_SYNTH_LIMIT {
                return Err(ZpqError::Guard { what: "p^n", value: size, limit: ODD_SYNTH_LIMIT });
            }
            synth_indicator(g)
        }
    }
}

fn synth_linear(g: &FunctionTable) -> Result<ZpqExpression, ZpqError> {
    let (p, q, n) = (g.p, g.q, g.n);
    let size = p.pow(n as u32) as usize;
    let points: Vec<Vec<u64>> = (0..size).map(|i| point_of_index(p, n, i)).collect();
    let cols = size * p as usize;
    let a: Vec<Vec<u64>> = points
        .iter()
        .map(|x| {
            let mut row = vec![0u64; cols];
            for (bi, beta) in points.iter().enumerate() {
                let dot = beta.iter().zip(x).fold(0, |s, (b, xi)| (s + b * xi) % p);
                for c in 0..p {
                    row[bi * p as usize + c as usize] = ((dot + c) % p != 0) as u64;
                }
            }
            row
        })
        .collect();
    let sol = solve_gf_system(&a, &g.values, q)?.ok_or(ZpqError::NoExpansion { p, q, s: n })?;
    let mut acc = Accumulator::new(p, q, n)?;
    for (bi, beta) in points.iter().enumerate() {
        for c in 0..p {
            let alpha = sol[bi * p as usize + c as usize];
            acc.add(beta.iter().map(|&b| b as u32).collect(), c, alpha);
        }
    }
    Ok(acc.finish())
}

fn synth_binary(g: &FunctionTable) -> Result<ZpqExpression, ZpqError> {
    let (q, n) = (g.q, g.n);
    let mut h: Vec<u64> = g.values.iter().map(|v| v % q).collect();
    let mut len = 1;
    while len < h.len() {
        for chunk in h.chunks_mut(2 * len) {
            let (lo, hi) = chunk.split_at_mut(len);
            for (u, v) in lo.iter_mut().zip(hi.iter_mut()) {
                let (a, b) = (*u, *v);
                *u = mod_add(a, b, q);
                *v = mod_add(a, q - b, q);
            }
        }
        len *= 2;
    }
    let mut acc = Accumulator::new(2, q, n)?;
    acc.add(vec![0; n], 1, g.values[0]);
    let scale = if n == 0 { 0 } else { mod_neg(mod_pow(mod_inv(2, q), n as u64 - 1, q), q) };
    for (idx, &hat) in h.iter().enumerate().skip(1) {
        if hat != 0 {
            let beta = point_of_index(2, n, idx).into_iter().map(|b| b as u32).collect();
            acc.add(beta, 0, mod_mul(scale, hat, q));
        }
    }
    Ok(acc.finish())
}

/// `[z = 0] = p^{-(n-1)} Σ_β b(β·z + 1) - (p - 1)` summed over `g(a)·[x - a = 0]`.
fn synth_indicator(g: &FunctionTable) -> Result<ZpqExpression, ZpqError> {
    let (p, q, n) = (g.p, g.q, g.n);
    let size = p.pow(n as u32) as usize;
    let pu = p as usize;
    // hist[idx * p + v]: over the already-transformed coordinates idx holds β,
    // the rest still hold a; v accumulates β·a.
    let mut hist = vec![0u64; size * pu];
    for (idx, &v) in g.values.iter().enumerate() {
        hist[idx * pu] = v % q;
    }
    let mut scratch = vec![0u64; size * pu];
    for i in 0..n {
        let stride = p.pow((n - 1 - i) as u32) as usize;
        scratch.iter_mut().for_each(|v| *v = 0);
        for idx in 0..size {
            let digit = (idx / stride) % pu;
            if digit != 0 {
                continue;
            }
            for b in 0..pu {
                let dst = idx + b * stride;
                for a in 0..pu {
                    let src = idx + a * stride;
                    let shift = (b * a) % pu;
                    for v in 0..pu {
                        let val = hist[src * pu + v];
                        if val != 0 {
                            let slot = &mut scratch[dst * pu + (v + shift) % pu];
                            *slot = mod_add(*slot, val, q);
                        }
                    }
                }
            }
        }
        std::mem::swap(&mut hist, &mut scratch);
    }
    let weight = if n == 0 { p % q } else { mod_pow(mod_inv(p % q, q), n as u64 - 1, q) };
    let total = g.values.iter().fold(0, |s, &v| mod_add(s, v % q, q));
    let mut acc = Accumulator::new(p, q, n)?;
    acc.add(vec![0; n], 1, mod_neg(mod_mul(p - 1, total, q), q));
    for bi in 0..size {
        let beta: Vec<u32> = point_of_index(p, n, bi).into_iter().map(|b| b as u32).collect();
        for v in 0..pu {
            let h = hist[bi * pu + v];
            if h != 0 {
                acc.add(beta.clone(), (1 + p - v as u64) % p, mod_mul(weight, h, q));
            }
        }
    }
    debug_assert_eq!(index_of_point(p, &vec![0; n]), 0);
    Ok(acc.finish())
}

/// `Γ(t)`: the bunch of `t` on level 1 feeding one `MOD_q^{accept}` gate.
pub fn expr_to_circuit(t: &ZpqExpression, final_accept: &[u64]) -> LayeredCircuit {
    let mut b = CircuitBuilder::new(t.arity(), vec![t.p(), t.q()]);
    let inputs: Vec<Bundle> = (0..t.arity()).map(|i| Bundle::plain(b.input(i))).collect();
    let bundle = b.add_bunch(1, t, &inputs);
    let out = b.add_gate(2, t.q(), final_accept.iter().map(|a| a % t.q()), bundle.members);
    b.finish(out, Some(json!({"builder": "zpq", "expression": t.summary_json(), "accept": final_accept})))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn and2() -> ZpqExpression {
        ZpqExpression::from_terms(2, 3, 2, [(vec![1, 0], 0, 2), (vec![0, 1], 0, 2), (vec![1, 1], 0, 1)]).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(ZpqExpression::zero(2, 3, 2).unwrap().eval(&[1, 1]).unwrap(), 0);
        let one = ZpqExpression::from_terms(3, 2, 2, [(vec![0, 0], 1, 1)]).unwrap();
        for x in [[0, 0], [2, 1]] {
            assert_eq!(one.eval(&x).unwrap(), 1);
        }
        let t = and2();
        assert_eq!(t.eval(&[1, 1]).unwrap(), 1);
        assert_eq!(t.eval(&[1, 0]).unwrap(), 0);
        assert_eq!(t.eval(&[1]), Err(ZpqError::Arity { expected: 2, got: 1 }));
    }

    #[test]
    fn canonicalization_merges_and_drops() {
        let t = ZpqExpression::from_terms(3, 2, 1, [(vec![1], 0, 1), (vec![4], 3, 1), (vec![0], 0, 1), (vec![0], 2, 1)])
            .unwrap();
        // (1,0) twice cancels mod 2; (0,0) vanishes; (0,2) becomes the constant key
        assert_eq!(t.terms(), &[Term { beta: vec![0], c: 1, alpha: 1 }]);
    }

    #[test]
    fn synthesize_b_is_single_term() {
        for (p, q) in [(2, 3), (3, 2), (5, 7)] {
            let g = FunctionTable::from_fn(p, 1, q, |x| (x[0] != 0) as u64);
            let t = synthesize(&g).unwrap();
            assert_eq!(t.terms(), &[Term { beta: vec![1], c: 0, alpha: 1 }], "p={p} q={q}");
        }
    }

    #[test]
    fn synthesize_and2_binary() {
        let g = FunctionTable::from_fn(2, 2, 3, |x| x[0] * x[1]);
        assert_eq!(synthesize(&g).unwrap(), and2());
    }

    #[test]
    fn both_odd_routes_agree_with_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (p, q, n) in [(3u64, 2, 2), (3, 5, 3), (5, 2, 2), (3, 7, 4), (7, 3, 1), (3, 2, 0)] {
            let size = p.pow(n as u32) as usize;
            let values: Vec<u64> = (0..size).map(|_| rng.random_range(0..q)).collect();
            let g = FunctionTable::new(p, n, q, values).unwrap();
            for route in [SynthesisRoute::LinearSolve, SynthesisRoute::ClosedForm] {
                let t = synthesize_with(&g, route).unwrap();
                for idx in 0..size {
                    let x = point_of_index(p, n, idx);
                    assert_eq!(t.eval(&x).unwrap(), g.values[idx], "{route:?} p={p} q={q} x={x:?}");
                }
            }
        }
    }

    #[test]
    fn binary_closed_form_term_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 0..=8 {
            let values: Vec<u64> = (0..1usize << n).map(|_| rng.random_range(0..5)).collect();
            let g = FunctionTable::new(2, n, 5, values).unwrap();
            let t = synthesize(&g).unwrap();
            assert!(t.len() <= (1 << n) + 1);
            for idx in 0..1usize << n {
                assert_eq!(t.eval(&point_of_index(2, n, idx)).unwrap(), g.values[idx]);
            }
        }
    }

    #[test]
    fn guards_and_prime_checks() {
        let g = FunctionTable::from_fn(3, 5, 2, |_| 0);
        assert!(matches!(synthesize_with(&g, SynthesisRoute::LinearSolve), Err(ZpqError::Guard { .. })));
        assert!(matches!(ZpqExpression::zero(3, 3, 1), Err(ZpqError::EqualPrimes(3))));
        assert!(matches!(ZpqExpression::zero(4, 3, 1), Err(ZpqError::NotPrime(4))));
        assert!(matches!(pseudo_and_expr(2, 3, 4, 3), Err(ZpqError::Guard { .. })));
    }

    #[test]
    fn and_profiles_expand_conjunctions() {
        for p in [2u64, 3, 5, 7] {
            for q in [2u64, 3, 5, 7, 11] {
                if p == q {
                    continue;
                }
                for s in 0..=9usize {
                    let lits: Vec<Lit> = (0..s).map(|i| Lit::new(i, true)).collect();
                    let t = conjunction_expr(p, q, s, &lits).unwrap();
                    for mask in 0..1u64 << s {
                        let want = (mask.count_ones() as usize == s) as u64;
                        assert_eq!(t.eval_mask(mask), want, "p={p} q={q} s={s} mask={mask:b}");
                    }
                }
            }
        }
    }

    #[test]
    fn negated_literals() {
        let lits = [Lit::new(0, false), Lit::new(2, true)];
        for (p, q) in [(2, 3), (3, 2), (5, 3)] {
            let t = conjunction_expr(p, q, 3, &lits).unwrap();
            for mask in 0..8u64 {
                let want = (mask & 1 == 0 && mask & 4 != 0) as u64;
                assert_eq!(t.eval_mask(mask), want);
            }
        }
        let contradiction = conjunction_expr(2, 3, 1, &[Lit::new(0, true), Lit::new(0, false)]).unwrap();
        assert!(contradiction.is_empty());
    }

    #[test]
    fn pseudo_and_matches_predicate() {
        for (p, q, nu) in [(3, 2, 1), (2, 3, 1), (2, 3, 2), (3, 2, 3), (5, 3, 1), (2, 5, 1)] {
            for n in 0..=8usize {
                let t = pseudo_and_expr(p, q, nu, n).unwrap();
                assert_eq!(pseudo_and_len(p, q, nu, n).unwrap(), t.len() as u128);
                let qn = q.pow(nu);
                for mask in 0..1u64 << n {
                    let zeros = n as u64 - mask.count_ones() as u64;
                    assert_eq!(t.eval_mask(mask), !zeros.is_multiple_of(qn) as u64, "p={p} q={q} nu={nu} n={n}");
                }
            }
        }
    }

    #[test]
    fn affine_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.random_range(1..6);
            let s = rng.random_range(0..5);
            let forms: Vec<AffineForm> = (0..s)
                .map(|_| AffineForm::new(2, (0..n).map(|_| rng.random_range(0..2)).collect(), rng.random_range(0..2)))
                .collect();
            let t = affine_product_expr(3, n, &forms).unwrap();
            for mask in 0..1u64 << n {
                let want = forms.iter().all(|f| f.eval_mask(mask) == 1) as u64;
                assert_eq!(t.eval_mask(mask), want);
            }
        }
    }

    #[test]
    fn complement_involution() {
        let t = and2();
        assert_eq!(t.complement().complement(), t);
        let z = ZpqExpression::zero(2, 3, 2).unwrap().complement();
        assert_eq!(z.terms(), &[Term { beta: vec![0, 0], c: 1, alpha: 1 }]);
    }

    #[test]
    fn lowered_and2() {
        let c = expr_to_circuit(&and2(), &[1]);
        assert_eq!(c.size(), 4);
        assert_eq!(c.compile().unwrap().truth_table(), vec![false, false, false, true]);
        let empty = expr_to_circuit(&ZpqExpression::zero(2, 3, 2).unwrap(), &[0]);
        assert!(empty.compile().unwrap().truth_table().iter().all(|&b| b));
    }
}

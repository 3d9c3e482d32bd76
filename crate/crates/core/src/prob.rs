//! Depth-2 AND with `O(log n)` random bits.
//!
//! For each setting `c` of the random bits the table holds `p*·r` affine
//! forms, each forced to 1 at the all-ones point; the circuit on `(a, b)`
//! multiplies `b(λ_{b,j}(a))` over `j`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::circuit::LayeredCircuit;
use crate::exec;
use crate::gf::{is_prime, AffineForm};
use crate::zpq::{affine_product_expr, expr_to_circuit, ZpqError, ZpqExpression};

pub const DEFAULT_SLACK: u32 = 6;
/// Exhaustive certification covers `2^{n+r}` pairs.
pub const CERTIFY_MAX_ARITY: usize = 12;
/// `prob_circuit` expands `2^r` products of `2r` forms: `2^{3r}` terms.
pub const CIRCUIT_MAX_LOG_TERMS: u32 = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProbError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("arity must be at least 1")]
    EmptyArity,
    #[error("arity {n} exceeds the certification limit {limit}")]
    Guard { n: usize, limit: usize },
    #[error("circuit lowering needs p = 2, got {0}")]
    OddPrime(u64),
    #[error("lowering would expand 2^{log_terms} terms, limit 2^{limit}")]
    TooLarge { log_terms: u32, limit: u32 },
    #[error("expected {expected} bits, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("no table reached the threshold in {attempts} attempts (best minimum {best_min} of {threshold})")]
    Exhausted { attempts: u32, best_min: u64, threshold: u64, best: Box<(LambdaTable, Certificate)> },
    #[error(transparent)]
    Expression(#[from] ZpqError),
}

/// Least `t` with `(p/(p-1))^t ≥ 2`.
pub fn p_star(p: u64) -> u32 {
    let (mut num, mut den) = (1u128, 1u128);
    let mut t = 0;
    while num < 2 * den {
        num *= p as u128;
        den *= (p - 1) as u128;
        t += 1;
    }
    t
}

pub fn random_bits(n: usize, slack: u32) -> u32 {
    slack + (n.max(1) as u64).next_power_of_two().trailing_zeros()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LambdaTable {
    pub p: u64,
    pub n: usize,
    pub r: u32,
    pub slack: u32,
    pub p_star: u32,
    pub seed: u64,
    /// Row `c` occupies `forms[c·p*r .. (c+1)·p*r]`.
    pub forms: Vec<AffineForm>,
}

impl LambdaTable {
    pub fn forms_per_row(&self) -> usize {
        (self.p_star * self.r) as usize
    }

    pub fn row(&self, c: u64) -> &[AffineForm] {
        let w = self.forms_per_row();
        &self.forms[c as usize * w..(c as usize + 1) * w]
    }
}

pub fn sample_lambda(p: u64, n: usize, slack: u32, seed: u64) -> Result<LambdaTable, ProbError> {
    if !is_prime(p) {
        return Err(ProbError::NotPrime(p));
    }
    if n == 0 {
        return Err(ProbError::EmptyArity);
    }
    let r = random_bits(n, slack);
    let ps = p_star(p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = (1usize << r) * (ps * r) as usize;
    let forms = (0..count)
        .map(|_| {
            let beta: Vec<u64> = (0..n).map(|_| rng.random_range(0..p)).collect();
            let s = beta.iter().sum::<u64>() % p;
            AffineForm::new(p, beta, (1 + p - s) % p)
        })
        .collect();
    Ok(LambdaTable { p, n, r, slack, p_star: ps, seed, forms })
}

/// Value of the circuit on `(a, b)`, with `a` and `b` as bitmasks.
pub fn eval_prob(t: &LambdaTable, a: u64, b: u64) -> bool {
    t.row(b).iter().all(|f| f.eval_mask(a) != 0)
}

pub fn eval_prob_bits(t: &LambdaTable, a: &[bool], b: &[bool]) -> Result<bool, ProbError> {
    let mask = |v: &[bool], expected: usize| {
        if v.len() != expected {
            return Err(ProbError::Arity { expected, got: v.len() });
        }
        Ok(v.iter().enumerate().fold(0u64, |m, (i, &x)| m | (x as u64) << i))
    };
    Ok(eval_prob(t, mask(a, t.n)?, mask(b, t.r as usize)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Certificate {
    /// `⌈(2/3)·2^r⌉`.
    pub threshold: u64,
    /// `counts[a]`: random strings `b` on which the table outputs `AND(a)`.
    pub counts: Vec<u64>,
    pub min_count: u64,
    pub attempts: u32,
}

impl Certificate {
    pub fn certified(&self) -> bool {
        self.min_count >= self.threshold
    }
}

pub fn threshold(r: u32) -> u64 {
    (2u64 << r).div_ceil(3)
}

pub fn certify(t: &LambdaTable) -> Result<Certificate, ProbError> {
    if t.n > CERTIFY_MAX_ARITY {
        return Err(ProbError::Guard { n: t.n, limit: CERTIFY_MAX_ARITY });
    }
    let ones = (1u64 << t.n) - 1;
    let rows = 1u64 << t.r;
    let counts = exec::map_collect(0..1u64 << t.n, |a| {
        let want = a == ones;
        (0..rows).filter(|&b| eval_prob(t, a, b) == want).count() as u64
    });
    let min_count = counts.iter().copied().min().unwrap_or(0);
    Ok(Certificate { threshold: threshold(t.r), counts, min_count, attempts: 1 })
}

/// Samples tables until one is certified; attempt seeds come from a ChaCha
/// stream keyed by `seed`.
pub fn find_good_lambda(
    p: u64,
    n: usize,
    slack: u32,
    max_attempts: u32,
    seed: u64,
) -> Result<(LambdaTable, Certificate), ProbError> {
    if n > CERTIFY_MAX_ARITY {
        return Err(ProbError::Guard { n, limit: CERTIFY_MAX_ARITY });
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(LambdaTable, Certificate)> = None;
    let max_attempts = max_attempts.max(1);
    for attempt in 1..=max_attempts {
        let t = sample_lambda(p, n, slack, seeds.next_u64())?;
        let mut cert = certify(&t)?;
        cert.attempts = attempt;
        if cert.certified() {
            return Ok((t, cert));
        }
        if best.as_ref().is_none_or(|(_, b)| cert.min_count > b.min_count) {
            best = Some((t, cert));
        }
    }
    let best = best.expect("at least one attempt ran");
    Err(ProbError::Exhausted {
        attempts: max_attempts,
        best_min: best.1.min_count,
        threshold: best.1.threshold,
        best: Box::new(best),
    })
}

/// The full expression over `(x, b)`: for each `c`, the product of
/// `[b_i = c_i]` and `b(λ_{c,j}(x))`.
pub fn prob_expression(t: &LambdaTable, q: u64) -> Result<ZpqExpression, ProbError> {
    if t.p != 2 {
        return Err(ProbError::OddPrime(t.p));
    }
    let log_terms = 3 * t.r;
    if log_terms > CIRCUIT_MAX_LOG_TERMS {
        return Err(ProbError::TooLarge { log_terms, limit: CIRCUIT_MAX_LOG_TERMS });
    }
    let n = t.n;
    let r = t.r as usize;
    let width = n + r;
    let mut total = ZpqExpression::zero(2, q, width)?;
    for c in 0..1u64 << r {
        let mut forms = Vec::with_capacity(r + t.forms_per_row());
        for i in 0..r {
            // b'(b_i - c_i) = b(b_i + c_i + 1) over Z_2
            let mut beta = vec![0; width];
            beta[n + i] = 1;
            forms.push(AffineForm::new(2, beta, (c >> i & 1) + 1));
        }
        for f in t.row(c) {
            let mut beta = f.beta.clone();
            beta.resize(width, 0);
            forms.push(AffineForm::new(2, beta, f.c));
        }
        total = total.plus(&affine_product_expr(q, width, &forms)?)?;
    }
    Ok(total)
}

/// Depth-2 `CC[2; q]` circuit on `n + r` inputs (`a` first, then `b`).
pub fn prob_circuit(t: &LambdaTable, q: u64) -> Result<LayeredCircuit, ProbError> {
    let expr = prob_expression(t, q)?;
    let mut c = expr_to_circuit(&expr, &[1]);
    c.origin = Some(serde_json::json!({
        "builder": "prob_and",
        "p": t.p, "q": q, "n": t.n, "r": t.r, "slack": t.slack, "seed": t.seed,
        "terms": expr.len(),
    }));
    Ok(c)
}

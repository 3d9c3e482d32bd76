//! Satisfiability of modular circuits, plus balance and spike analysis.
//!
//! Both solvers rest on a lower bound `f` for the size of circuits computing
//! `AND`: a satisfiable circuit of size `s` has a witness of weight at most
//! `f⁻¹(s)` and at least a `2^{-f⁻¹(s)}` fraction of satisfying inputs. The
//! bound is the caller's claim; the solvers stay sound when it is wrong.

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::circuit::{evaluate, Assignment, CircuitError, CompiledCircuit, LayeredCircuit};
use crate::exec;

pub const BRUTE_FORCE_MAX_ARITY: usize = 24;
pub const BALANCE_MAX_ARITY: usize = 24;
pub const SPIKE_MAX_ARITY: usize = 20;
pub const RANSAM_CHUNK: u64 = 1024;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SatError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("bound function {name} is not increasing: f({a}) = {fa} > f({b}) = {fb}")]
    NotMonotone { name: String, a: u64, fa: u64, b: u64, fb: u64 },
    #[error("unknown bound function {0:?} (expected linear, square or exp2)")]
    UnknownBound(String),
    #[error("the circuit is constant")]
    Constant,
    #[error("witness has {got} bits, circuit has {expected} inputs")]
    WitnessArity { expected: usize, got: usize },
    #[error("{0} does not satisfy the circuit")]
    NotAWitness(Assignment),
}

/// An increasing `f: N -> N` standing in for the least size of a circuit
/// computing `AND_n`.
#[derive(Clone)]
pub struct BoundFunction {
    name: String,
    f: Arc<dyn Fn(u64) -> u64 + Send + Sync>,
}

impl fmt::Debug for BoundFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BoundFunction({})", self.name)
    }
}

impl BoundFunction {
    /// Spot-checks monotonicity on `0..=64` and on powers of two.
    pub fn new(name: impl Into<String>, f: impl Fn(u64) -> u64 + Send + Sync + 'static) -> Result<Self, SatError> {
        let name = name.into();
        let probes: Vec<u64> = (0..=64).chain((7..62).map(|e| 1u64 << e)).collect();
        for w in probes.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (fa, fb) = (f(a), f(b));
            if fa > fb {
                return Err(SatError::NotMonotone { name, a, fa, b, fb });
            }
        }
        Ok(Self { name, f: Arc::new(f) })
    }

    pub fn linear() -> Self {
        Self::new("linear", |n| n).expect("monotone")
    }

    pub fn square() -> Self {
        Self::new("square", |n| n.saturating_mul(n)).expect("monotone")
    }

    pub fn exp2() -> Self {
        Self::new("exp2", |n| if n >= 64 { u64::MAX } else { 1u64 << n }).expect("monotone")
    }

    pub fn by_name(name: &str) -> Result<Self, SatError> {
        match name {
            "linear" => Ok(Self::linear()),
            "square" => Ok(Self::square()),
            "exp2" => Ok(Self::exp2()),
            other => Err(SatError::UnknownBound(other.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, n: u64) -> u64 {
        (self.f)(n)
    }
}

impl Default for BoundFunction {
    fn default() -> Self {
        Self::linear()
    }
}

/// Largest `n` with `f(n) ≤ k`, or 0 when already `f(1) > k`.
pub fn inverse_bound(f: &BoundFunction, k: u64) -> u64 {
    if f.eval(1) > k {
        return 0;
    }
    let mut lo = 1u64;
    while lo < 1 << 62 && f.eval(2 * lo) <= k {
        lo *= 2;
    }
    // f(lo) ≤ k < f(hi)
    let mut hi = 2 * lo;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if f.eval(mid) <= k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Satisfiable(Assignment),
    Unsatisfiable,
    /// No witness within the weight bound; exact only if the bound is valid.
    UnsatisfiableUnderBound,
    /// No witness among the samples drawn.
    ProbablyUnsatisfiable,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Satisfiable(_) => "satisfiable",
            Verdict::Unsatisfiable => "unsatisfiable",
            Verdict::UnsatisfiableUnderBound => "unsatisfiable-under-bound",
            Verdict::ProbablyUnsatisfiable => "probably-unsatisfiable",
        }
    }

    pub fn witness(&self) -> Option<&Assignment> {
        match self {
            Verdict::Satisfiable(a) => Some(a),
            _ => None,
        }
    }

    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Satisfiable(_))
    }
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub solver: &'static str,
    pub verdict: Verdict,
    /// Assignments examined or samples drawn.
    pub work: u64,
    pub bound: Option<String>,
    /// `f⁻¹(|Γ|)`.
    pub weight_bound: Option<u64>,
    pub seed: Option<u64>,
    pub elapsed: Duration,
}

impl SolverReport {
    /// Deterministic summary; elapsed time is left out.
    pub fn to_json(&self) -> Value {
        json!({
            "solver": self.solver,
            "verdict": self.verdict.name(),
            "witness": self.verdict.witness().map(ToString::to_string),
            "work": self.work,
            "bound": self.bound,
            "weight_bound": self.weight_bound,
            "seed": self.seed,
        })
    }
}

fn checked(circuit: &LayeredCircuit, mask: u64) -> Result<Verdict, SatError> {
    let a = Assignment::from_mask(mask, circuit.num_inputs);
    if !evaluate(circuit, &a)? {
        return Err(SatError::NotAWitness(a));
    }
    Ok(Verdict::Satisfiable(a))
}

fn guard(circuit: &LayeredCircuit, limit: usize) -> Result<(), CircuitError> {
    if circuit.num_inputs > limit {
        return Err(CircuitError::GuardExceeded { n: circuit.num_inputs, guard: limit });
    }
    Ok(())
}

pub fn brute_force_sat(circuit: &LayeredCircuit) -> Result<SolverReport, SatError> {
    guard(circuit, BRUTE_FORCE_MAX_ARITY)?;
    let start = Instant::now();
    let c = circuit.compile()?;
    let total = 1u64 << circuit.num_inputs;
    let hit = exec::find_first_with(0..total, || c.scratch(), |s, m| c.eval_mask(m, s));
    let (verdict, work) = match hit {
        Some(m) => (checked(circuit, m)?, m + 1),
        None => (Verdict::Unsatisfiable, total),
    };
    Ok(SolverReport {
        solver: "brute",
        verdict,
        work,
        bound: None,
        weight_bound: None,
        seed: None,
        elapsed: start.elapsed(),
    })
}

fn binomials(n: usize) -> Vec<Vec<u64>> {
    let mut t = vec![vec![0u64; n + 2]; n + 2];
    for i in 0..=n + 1 {
        t[i][0] = 1;
        for j in 1..=i {
            t[i][j] = t[i - 1][j - 1].saturating_add(if j < i { t[i - 1][j] } else { 0 });
        }
    }
    t
}

/// The `rank`-th `k`-subset of `0..n` in increasing mask order.
fn unrank_colex(binom: &[Vec<u64>], k: usize, mut rank: u64) -> u64 {
    let mut mask = 0u64;
    let mut top = binom.len() - 1;
    for i in (1..=k).rev() {
        let mut c = i - 1;
        while c + 1 < top && binom[c + 1][i] <= rank {
            c += 1;
        }
        rank -= binom[c][i];
        mask |= 1 << c;
        top = c;
    }
    mask
}

/// Every assignment of weight at most `f⁻¹(|Γ|)`, by weight and then in
/// increasing mask order.
pub fn low_weight_sat(circuit: &LayeredCircuit, f: &BoundFunction) -> Result<SolverReport, SatError> {
    let n = circuit.num_inputs;
    guard(circuit, 63)?;
    let start = Instant::now();
    let c = circuit.compile()?;
    let w = inverse_bound(f, circuit.size() as u64);
    let top = w.min(n as u64) as usize;
    let binom = binomials(n);
    let mut work = 0u64;
    let mut verdict = None;
    for k in 0..=top {
        let count = binom[n][k];
        let hit = exec::find_first_with(0..count, || c.scratch(), |s, rank| {
            c.eval_mask(unrank_colex(&binom, k, rank), s)
        });
        if let Some(rank) = hit {
            work += rank + 1;
            verdict = Some(checked(circuit, unrank_colex(&binom, k, rank))?);
            break;
        }
        work += count;
    }
    let verdict = verdict.unwrap_or(if w >= n as u64 {
        Verdict::Unsatisfiable
    } else {
        Verdict::UnsatisfiableUnderBound
    });
    Ok(SolverReport {
        solver: "lowweight",
        verdict,
        work,
        bound: Some(f.name().to_string()),
        weight_bound: Some(w),
        seed: None,
        elapsed: start.elapsed(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RanSamOptions {
    pub max_samples: Option<u64>,
    pub time_budget: Option<Duration>,
}

fn sample_chunk(seed: u64, chunk: u64, len: u64, n: usize) -> impl Iterator<Item = u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let mask = if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
    (0..len).map(move |_| rng.next_u64() & mask)
}

/// `2^{min(f⁻¹(|Γ|), n)}` uniform samples. Chunk `i` of 1024 samples reads
/// ChaCha stream `i`, so results do not depend on the worker count.
pub fn ransam(
    circuit: &LayeredCircuit,
    f: &BoundFunction,
    seed: u64,
    opts: RanSamOptions,
) -> Result<SolverReport, SatError> {
    let n = circuit.num_inputs;
    guard(circuit, 64)?;
    let start = Instant::now();
    let c = circuit.compile()?;
    let w = inverse_bound(f, circuit.size() as u64);
    let e = w.min(n as u64).min(62);
    let mut samples = 1u64 << e;
    if let Some(cap) = opts.max_samples {
        samples = samples.min(cap.max(1));
    }
    let chunks = samples.div_ceil(RANSAM_CHUNK);
    let chunk_len = |i: u64| RANSAM_CHUNK.min(samples - i * RANSAM_CHUNK);
    let hits_in = |s: &mut Vec<bool>, i: u64| sample_chunk(seed, i, chunk_len(i), n).position(|m| c.eval_mask(m, s));
    // batches let the time budget interrupt long runs
    const BATCH: u64 = 256;
    let mut work = 0u64;
    let mut verdict = Verdict::ProbablyUnsatisfiable;
    let mut from = 0;
    while from < chunks {
        let to = (from + BATCH).min(chunks);
        let hit = exec::find_first_with(from..to, || c.scratch(), |s, i| hits_in(s, i).is_some());
        if let Some(i) = hit {
            let pos = hits_in(&mut c.scratch(), i).expect("chunk has a hit") as u64;
            let mask = sample_chunk(seed, i, pos + 1, n).last().expect("nonempty");
            work += (i - from) * RANSAM_CHUNK + pos + 1;
            verdict = checked(circuit, mask)?;
            break;
        }
        work += (from..to).map(chunk_len).sum::<u64>();
        from = to;
        if opts.time_budget.is_some_and(|b| start.elapsed() >= b) {
            break;
        }
    }
    Ok(SolverReport {
        solver: "ransam",
        verdict,
        work,
        bound: Some(f.name().to_string()),
        weight_bound: Some(w),
        seed: Some(seed),
        elapsed: start.elapsed(),
    })
}

/// Success rate of [`ransam`] at each sample count over `runs` seeds
/// `seed, seed + 1, …`.
pub fn ransam_success_curve(
    circuit: &LayeredCircuit,
    sample_counts: &[u64],
    runs: u64,
    seed: u64,
) -> Result<Vec<(u64, u64)>, SatError> {
    let f = BoundFunction::linear();
    sample_counts
        .iter()
        .map(|&s| {
            let opts = RanSamOptions { max_samples: Some(s), time_budget: None };
            let mut found = 0;
            for r in 0..runs {
                if ransam(circuit, &f, seed.wrapping_add(r), opts)?.verdict.is_sat() {
                    found += 1;
                }
            }
            Ok((s, found))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BalanceReport {
    pub zeros: u64,
    pub ones: u64,
    /// `1 - ||f⁻¹(0)| - |f⁻¹(1)|| / 2^n`.
    pub balance: Ratio<u64>,
    /// Value of the smaller pile (0 on ties).
    pub stack_value: bool,
    pub stack_size: u64,
}

impl BalanceReport {
    fn from_table(table: &[bool]) -> Self {
        let ones = table.iter().filter(|&&v| v).count() as u64;
        let zeros = table.len() as u64 - ones;
        let stack_value = ones < zeros;
        let stack_size = ones.min(zeros);
        Self { zeros, ones, balance: Ratio::new(2 * stack_size, table.len() as u64), stack_value, stack_size }
    }

    pub fn is_constant(&self) -> bool {
        self.stack_size == 0
    }

    pub fn to_json(&self) -> Value {
        json!({
            "zeros": self.zeros,
            "ones": self.ones,
            "balance": self.balance.to_string(),
            "stack_value": self.stack_value as u8,
            "stack_size": self.stack_size,
        })
    }
}

pub fn analyze_balance(circuit: &LayeredCircuit) -> Result<BalanceReport, SatError> {
    guard(circuit, BALANCE_MAX_ARITY)?;
    Ok(BalanceReport::from_table(&circuit.compile()?.truth_table()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeReduction {
    /// `(variable, value)` in the order fixed.
    pub fixings: Vec<(usize, bool)>,
    /// Variables left free, increasing.
    pub free: Vec<usize>,
    /// Residual truth table over `free` (bit `i` of the index is `free[i]`).
    pub residual: Vec<bool>,
    /// Stack size before each round and after the last.
    pub stack_sizes: Vec<u64>,
}

impl SpikeReduction {
    pub fn to_json(&self) -> Value {
        json!({
            "fixings": self.fixings.iter().map(|&(v, b)| json!({"var": v + 1, "value": b as u8})).collect::<Vec<_>>(),
            "free": self.free.iter().map(|v| v + 1).collect::<Vec<_>>(),
            "residual": self.residual.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>(),
            "stack_sizes": self.stack_sizes,
        })
    }
}

/// Index of the table with bit `pos` inserted as `bit`.
fn insert_bit(j: u64, pos: usize, bit: bool) -> u64 {
    let low = j & ((1 << pos) - 1);
    ((j >> pos) << (pos + 1)) | (bit as u64) << pos | low
}

/// Fix variables one at a time until the function is a spike, at least
/// halving the stack each round.
pub fn reduce_to_spike(circuit: &LayeredCircuit) -> Result<SpikeReduction, SatError> {
    guard(circuit, SPIKE_MAX_ARITY)?;
    let mut table = circuit.compile()?.truth_table();
    let mut free: Vec<usize> = (0..circuit.num_inputs).collect();
    let mut fixings = Vec::new();
    let mut report = BalanceReport::from_table(&table);
    if report.is_constant() {
        return Err(SatError::Constant);
    }
    let mut stack_sizes = vec![report.stack_size];
    while report.stack_size > 1 {
        let stack: Vec<u64> =
            (0..table.len() as u64).filter(|&j| table[j as usize] == report.stack_value).collect();
        let pos = (0..free.len())
            .find(|&i| {
                let first = stack[0] >> i & 1;
                stack.iter().any(|&j| j >> i & 1 != first)
            })
            .expect("distinct stack points differ somewhere");
        let ones = stack.iter().filter(|&&j| j >> pos & 1 == 1).count();
        let bit = ones < stack.len() - ones;
        table = (0..table.len() as u64 / 2).map(|j| table[insert_bit(j, pos, bit) as usize]).collect();
        fixings.push((free.remove(pos), bit));
        report = BalanceReport::from_table(&table);
        debug_assert!(!report.is_constant());
        stack_sizes.push(report.stack_size);
    }
    Ok(SpikeReduction { fixings, free, residual: table, stack_sizes })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BalanceCheck {
    /// `bal(Γ) ≥ 2^{1-w}` with `w = f⁻¹(|Γ|)`.
    Pass { balance: Ratio<u64>, weight_bound: u64 },
    /// A counterexample to `f` as a lower bound.
    Fail { balance: Ratio<u64>, weight_bound: u64, required_stack: u64, stack: u64 },
    Skipped,
}

impl BalanceCheck {
    pub fn to_json(&self) -> Value {
        match self {
            BalanceCheck::Pass { balance, weight_bound } => {
                json!({"result": "pass", "balance": balance.to_string(), "weight_bound": weight_bound})
            }
            BalanceCheck::Fail { balance, weight_bound, required_stack, stack } => json!({
                "result": "fail", "balance": balance.to_string(), "weight_bound": weight_bound,
                "required_stack": required_stack, "stack": stack,
            }),
            BalanceCheck::Skipped => json!({"result": "skipped", "reason": "constant circuit"}),
        }
    }
}

pub fn check_balance_bound(circuit: &LayeredCircuit, f: &BoundFunction) -> Result<BalanceCheck, SatError> {
    let report = analyze_balance(circuit)?;
    if report.is_constant() {
        return Ok(BalanceCheck::Skipped);
    }
    let n = circuit.num_inputs as u64;
    let w = inverse_bound(f, circuit.size() as u64);
    // bal ≥ 2^{1-w}  ⟺  stack ≥ 2^{n-w}
    let required = if w >= n { 1 } else { 1u64 << (n - w) };
    Ok(if w >= n || report.stack_size >= required {
        BalanceCheck::Pass { balance: report.balance, weight_bound: w }
    } else {
        BalanceCheck::Fail { balance: report.balance, weight_bound: w, required_stack: required, stack: report.stack_size }
    })
}

/// With every variable outside the witness support set to 0, the circuit
/// computes `AND` of the support.
pub fn restricted_and_property(circuit: &LayeredCircuit, witness: &Assignment) -> Result<bool, SatError> {
    let n = circuit.num_inputs;
    if witness.len() != n {
        return Err(SatError::WitnessArity { expected: n, got: witness.len() });
    }
    guard(circuit, BRUTE_FORCE_MAX_ARITY)?;
    let c: CompiledCircuit = circuit.compile()?;
    let support = witness.to_mask();
    let mut scratch = c.scratch();
    // enumerate submasks of the support
    let mut sub = support;
    loop {
        if c.eval_mask(sub, &mut scratch) != (sub == support) {
            return Ok(false);
        }
        if sub == 0 {
            return Ok(true);
        }
        sub = (sub - 1) & support;
    }
}

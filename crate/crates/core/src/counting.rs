//! Multilinear polynomials over GF(p) on boolean inputs: counting
//! polynomials, Beigel–Tarui gate polynomials, circuit translation, and
//! fooling witnesses.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::circuit::{Assignment, CircuitError, LayeredCircuit, ModGate, Source};
use crate::gf::{is_prime, lucas_binomial, mod_add, mod_mul, mod_neg, mod_sub, solve_gf_system};

pub const DEFAULT_MONOMIAL_CAP: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("residue {c} is outside Z_{modulus}")]
    Residue { c: u64, modulus: u64 },
    #[error("arity {0} exceeds 64 variables")]
    Arity(usize),
    #[error("level moduli {0:?} are not one common prime power")]
    NotPrimePower(Vec<u64>),
    #[error("monomial cap {cap} exceeded at gate {gate} (level {level}, partial degree {degree})")]
    Cap { cap: usize, gate: u32, level: usize, degree: usize },
    #[error("the zero polynomial has no fooling assignment")]
    Zero,
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Multilinear polynomial; monomial `mask` is `∏_{i ∈ mask} x_{i+1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsePolynomial {
    p: u64,
    n: usize,
    terms: BTreeMap<u64, u64>,
}

impl SparsePolynomial {
    pub fn zero(p: u64, n: usize) -> Self {
        assert!(n <= 64);
        Self { p, n, terms: BTreeMap::new() }
    }

    pub fn constant(p: u64, n: usize, c: u64) -> Self {
        let mut s = Self::zero(p, n);
        s.add_term(0, c);
        s
    }

    pub fn var(p: u64, n: usize, i: usize) -> Self {
        let mut s = Self::zero(p, n);
        s.add_term(1u64 << i, 1);
        s
    }

    pub fn from_terms(p: u64, n: usize, terms: impl IntoIterator<Item = (u64, u64)>) -> Self {
        let mut s = Self::zero(p, n);
        for (m, c) in terms {
            s.add_term(m, c);
        }
        s
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &BTreeMap<u64, u64> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|m| m.count_ones() as usize).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, mask: u64, coef: u64) {
        let coef = coef % self.p;
        if coef == 0 {
            return;
        }
        let p = self.p;
        let e = self.terms.entry(mask).or_insert(0);
        *e = mod_add(*e, coef, p);
        if *e == 0 {
            self.terms.remove(&mask);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&m, &c) in &other.terms {
            out.add_term(m, c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&m, &c) in &other.terms {
            out.add_term(m, mod_neg(c, self.p));
        }
        out
    }

    pub fn scale(&self, k: u64) -> Self {
        Self::from_terms(self.p, self.n, self.terms.iter().map(|(&m, &c)| (m, mod_mul(c, k % self.p, self.p))))
    }

    /// Product with `x^2 = x`.
    pub fn mul(&self, other: &Self) -> Self {
        let mut acc: BTreeMap<u64, u64> = BTreeMap::new();
        for (&m1, &c1) in &self.terms {
            for (&m2, &c2) in &other.terms {
                let e = acc.entry(m1 | m2).or_insert(0);
                *e = mod_add(*e, mod_mul(c1, c2, self.p), self.p);
            }
        }
        acc.retain(|_, c| *c != 0);
        Self { p: self.p, n: self.n, terms: acc }
    }

    pub fn pow(&self, mut e: u64) -> Self {
        let mut base = self.clone();
        let mut out = Self::constant(self.p, self.n, 1);
        while e > 0 {
            if e & 1 == 1 {
                out = out.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        out
    }

    pub fn eval_mask(&self, mask: u64) -> u64 {
        self.terms.iter().filter(|(&m, _)| m & mask == m).fold(0, |s, (_, &c)| mod_add(s, c, self.p))
    }

    pub fn eval(&self, a: &Assignment) -> u64 {
        self.eval_mask(a.to_mask())
    }

    /// Set the variables in `mask` to 1.
    pub fn fix_ones(&self, mask: u64) -> Self {
        Self::from_terms(self.p, self.n, self.terms.iter().map(|(&m, &c)| (m & !mask, c)))
    }
}

/// Canonical text, e.g. `1 + x1 + x2*x3 (mod 2)`: monomials by degree, then
/// by variable list, coefficient 1 omitted.
impl fmt::Display for SparsePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut monos: Vec<(Vec<usize>, u64)> = self
            .terms
            .iter()
            .map(|(&m, &c)| ((0..64).filter(|i| m >> i & 1 == 1).map(|i| i + 1).collect(), c))
            .collect();
        monos.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
        if monos.is_empty() {
            return write!(f, "0 (mod {})", self.p);
        }
        let parts: Vec<String> = monos
            .iter()
            .map(|(vars, c)| {
                let body = vars.iter().map(|v| format!("x{v}")).collect::<Vec<_>>().join("*");
                match (vars.is_empty(), *c) {
                    (true, c) => c.to_string(),
                    (false, 1) => body,
                    (false, c) => format!("{c}*{body}"),
                }
            })
            .collect();
        write!(f, "{} (mod {})", parts.join(" + "), self.p)
    }
}

/// `Σ_j α_j v_j` where `v_j` is the sum of all `j`-variable monomials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetricCombination {
    p: u64,
    modulus: u64,
    n: u64,
    coefficients: Vec<u64>,
}

impl SymmetricCombination {
    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn coefficients(&self) -> &[u64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.iter().rposition(|&a| a != 0).unwrap_or(0)
    }

    /// Value on a boolean point with `ones` ones: `Σ α_j C(ones, j)`.
    pub fn eval_count(&self, ones: u64) -> u64 {
        self.coefficients
            .iter()
            .enumerate()
            .fold(0, |s, (j, &a)| mod_add(s, mod_mul(a, lucas_binomial(self.p, ones, j as u64), self.p), self.p))
    }

    pub fn eval_mask(&self, mask: u64) -> u64 {
        self.eval_count(mask.count_ones() as u64)
    }

    pub fn to_polynomial(&self, cap: usize) -> Result<SparsePolynomial, PolyError> {
        let n = self.n as usize;
        if n > 64 {
            return Err(PolyError::Arity(n));
        }
        let mut out = SparsePolynomial::zero(self.p, n);
        for (j, &a) in self.coefficients.iter().enumerate() {
            if a == 0 || j > n {
                continue;
            }
            let mut over = false;
            crate::zpq::for_each_subset(n, j, |m| {
                if out.len() >= cap {
                    over = true;
                } else {
                    out.add_term(m, a);
                }
            });
            if over {
                return Err(PolyError::Cap { cap, gate: 0, level: 0, degree: j });
            }
        }
        Ok(out)
    }
}

/// `w` with `w(x) = 0` iff the number of zeros of `x ∈ {0,1}^n` is divisible
/// by `p^k`, else `w(x) = 1`; degree at most `p^k - 1`.
pub fn counting_poly(p: u64, k: u32, n: u64) -> SymmetricCombination {
    assert!(is_prime(p), "{p} is not prime");
    assert!(k >= 1);
    let m = p.pow(k);
    let mu = m as usize;
    let basis: Vec<Vec<u64>> =
        (0..m).map(|s| (0..m).map(|j| lucas_binomial(p, s, j)).collect()).collect();
    let target: Vec<u64> = (0..m).map(|s| !(n + m - s % m).is_multiple_of(m) as u64).collect();
    let coefficients = solve_gf_system(&basis, &target, p)
        .expect("p is prime")
        .expect("the binomial basis matrix is unitriangular, hence invertible");
    debug_assert_eq!(coefficients.len(), mu);
    SymmetricCombination { p, modulus: m, n, coefficients }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BtVariant {
    /// `[Σx ≡ 0 mod p^k]`
    R0,
    /// `[Σx ≡ c mod p^k]`
    Rc(u64),
    /// `[Σx mod p^k ∈ A]`
    RA(Vec<u64>),
}

/// Elementary symmetric coefficient vectors as a truncated series in `t`:
/// `series[d]` is `E_d`.
type Series = Vec<SparsePolynomial>;

fn series_one(p: u64, n: usize, len: usize) -> Series {
    let mut s = vec![SparsePolynomial::zero(p, n); len];
    s[0] = SparsePolynomial::constant(p, n, 1);
    s
}

/// Multiply the series by `1 + y·((1 + t)^μ - 1)` for a 0/1-valued `y`.
fn series_mul_wire(series: &Series, y: &SparsePolynomial, mu: u64, p: u64) -> Series {
    let len = series.len();
    let mut out = series.clone();
    for d in 1..len {
        let c = lucas_binomial(p, mu, d as u64);
        if c == 0 {
            continue;
        }
        let yc = y.scale(c);
        for (e, src) in series.iter().enumerate().take(len - d) {
            if !src.is_zero() {
                out[e + d] = out[e + d].add(&src.mul(&yc));
            }
        }
    }
    out
}

/// Multiply by `(1 + t)^pad`.
fn series_mul_constant(series: &Series, pad: u64, p: u64) -> Series {
    let len = series.len();
    let mut out: Series = vec![SparsePolynomial::zero(p, series[0].arity()); len];
    for (e, src) in series.iter().enumerate() {
        for d in 0..len - e {
            let c = lucas_binomial(p, pad, d as u64);
            if c != 0 {
                out[e + d] = out[e + d].add(&src.scale(c));
            }
        }
    }
    out
}

/// `∏_{j<k} (1 - E_{p^j}^{p-1})` over the series.
fn r0_from_series(series: &Series, p: u64, k: u32) -> SparsePolynomial {
    let n = series[0].arity();
    let one = SparsePolynomial::constant(p, n, 1);
    let mut out = one.clone();
    for j in 0..k {
        let e = &series[p.pow(j) as usize];
        out = out.mul(&one.sub(&e.pow(p - 1)));
    }
    out
}

fn residue_set(variant: &BtVariant, m: u64) -> Result<Vec<u64>, PolyError> {
    let set = match variant {
        BtVariant::R0 => vec![0],
        BtVariant::Rc(c) => vec![*c],
        BtVariant::RA(a) => {
            let mut a = a.clone();
            a.sort_unstable();
            a.dedup();
            a
        }
    };
    if let Some(&c) = set.iter().find(|&&c| c >= m) {
        return Err(PolyError::Residue { c, modulus: m });
    }
    Ok(set)
}

/// Polynomial of the gate `MOD_{p^k}^A` applied to the 0/1-valued inputs
/// `ys` with multiplicities `mults`.
fn gate_polynomial(ys: &[(SparsePolynomial, u64)], p: u64, k: u32, accept: &[u64], n: usize) -> SparsePolynomial {
    let m = p.pow(k);
    let len = m as usize;
    let mut series = series_one(p, n, len);
    for (y, mu) in ys {
        series = series_mul_wire(&series, y, *mu, p);
    }
    let mut out = SparsePolynomial::zero(p, n);
    for &c in accept {
        let padded = series_mul_constant(&series, (m - c) % m, p);
        out = out.add(&r0_from_series(&padded, p, k));
    }
    out
}

/// Beigel–Tarui polynomial over `n` boolean variables.
pub fn beigel_tarui_poly(p: u64, k: u32, variant: &BtVariant, n: usize) -> Result<SparsePolynomial, PolyError> {
    if !is_prime(p) {
        return Err(PolyError::NotPrime(p));
    }
    if n > 64 {
        return Err(PolyError::Arity(n));
    }
    let m = p.pow(k);
    let set = residue_set(variant, m)?;
    let ys: Vec<(SparsePolynomial, u64)> = (0..n).map(|i| (SparsePolynomial::var(p, n, i), 1)).collect();
    Ok(gate_polynomial(&ys, p, k, &set, n))
}

/// The same `r_c` built by the product form `1 - ∏ (1 - r_c)`.
pub fn beigel_tarui_product_form(p: u64, k: u32, accept: &[u64], n: usize) -> Result<SparsePolynomial, PolyError> {
    let one = SparsePolynomial::constant(p, n, 1);
    let mut prod = one.clone();
    for &c in accept {
        let rc = beigel_tarui_poly(p, k, &BtVariant::Rc(c), n)?;
        prod = prod.mul(&one.sub(&rc));
    }
    Ok(one.sub(&prod))
}

/// Result of translating a circuit.
#[derive(Debug, Clone)]
pub struct CircuitPolynomial {
    pub poly: SparsePolynomial,
    /// Per-gate degree bound `d = max |A'| · (p^k - 1)`.
    pub d: usize,
    /// `d^h`.
    pub degree_bound: u128,
}

/// Translate a circuit whose level moduli are all `p^k`.
pub fn circuit_to_polynomial(circuit: &LayeredCircuit, cap: usize) -> Result<CircuitPolynomial, PolyError> {
    circuit.validate()?;
    let m = circuit.levels[0];
    let bad = || PolyError::NotPrimePower(circuit.levels.clone());
    if circuit.levels.iter().any(|&l| l != m) {
        return Err(bad());
    }
    let (p, k) = match crate::circuit::Modulus::new(m).prime_power() {
        Some(pk) => pk,
        None => return Err(bad()),
    };
    let n = circuit.num_inputs;
    if n > 64 {
        return Err(PolyError::Arity(n));
    }
    let mut order: Vec<&ModGate> = circuit.gates.iter().collect();
    order.sort_by_key(|g| g.level);
    let mut polys: std::collections::HashMap<crate::circuit::GateId, SparsePolynomial> = Default::default();
    let mut d = 0usize;
    for g in order {
        let ys: Vec<(SparsePolynomial, u64)> = g
            .wires
            .iter()
            .map(|w| {
                let y = match w.src {
                    Source::Input(i) => SparsePolynomial::var(p, n, i),
                    Source::Const(i) => SparsePolynomial::constant(p, n, circuit.constants[i] as u64),
                    Source::Gate(id) => polys[&id].clone(),
                };
                (y, w.mult % g.modulus)
            })
            .collect();
        let lifted: Vec<u64> = (0..m).filter(|a| g.accept.binary_search(&(a % g.modulus)).is_ok()).collect();
        d = d.max(lifted.len() * (m as usize - 1));
        let poly = gate_polynomial(&ys, p, k, &lifted, n);
        if poly.len() > cap {
            return Err(PolyError::Cap { cap, gate: g.id.0, level: g.level, degree: poly.degree() });
        }
        polys.insert(g.id, poly);
    }
    let poly = polys.remove(&circuit.output).expect("validated output");
    let degree_bound = (d as u128).saturating_pow(circuit.depth() as u32);
    Ok(CircuitPolynomial { poly, d, degree_bound })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoolingWitness {
    pub assignment: Assignment,
    pub value: u64,
    /// Some coordinate is 0, so a circuit with this polynomial is not `AND_n`.
    pub refutes_and: bool,
}

/// Set the variables of a minimal-degree monomial (first in canonical
/// order) to 1.
pub fn fooling_assignment(w: &SparsePolynomial, n: usize) -> Result<FoolingWitness, PolyError> {
    let (&mask, _) = w
        .terms()
        .iter()
        .min_by(|a, b| {
            let key = |m: u64| (m.count_ones(), (0..64).filter(|i| m >> i & 1 == 1).collect::<Vec<_>>());
            key(*a.0).cmp(&key(*b.0))
        })
        .ok_or(PolyError::Zero)?;
    let assignment = Assignment::from_mask(mask, n);
    let value = w.eval_mask(mask);
    debug_assert_ne!(value, 0);
    Ok(FoolingWitness { refutes_and: (mask.count_ones() as usize) < n, value, assignment })
}

/// A nonempty index set summing to 0 mod `m` (0-based indices): the
/// segment between the first two equal prefix sums.
pub fn zero_sum_witness(values: &[u64], m: u64) -> Result<Vec<usize>, PolyError> {
    if (values.len() as u64) < m {
        return Err(PolyError::TooShort { needed: m as usize, got: values.len() });
    }
    let mut seen = vec![usize::MAX; m as usize];
    seen[0] = 0;
    let mut s = 0;
    for (j, &v) in values.iter().enumerate() {
        s = mod_add(s, v % m, m);
        let i = seen[s as usize];
        if i != usize::MAX {
            return Ok((i..=j).collect());
        }
        seen[s as usize] = j + 1;
    }
    unreachable!("pigeonhole over m + 1 prefix sums")
}

/// Two inputs a single `MOD_m` gate cannot tell apart although `AND` can:
/// all-ones, and all-ones with a zero-sum set of wires cleared.
pub fn single_gate_fooling_pair(gate: &ModGate, n: usize) -> Result<(Assignment, Assignment), PolyError> {
    let mut mults = vec![0u64; n];
    for w in &gate.wires {
        if let Source::Input(i) = w.src {
            mults[i] = mod_add(mults[i], w.mult % gate.modulus, gate.modulus);
        }
    }
    let idx = zero_sum_witness(&mults, gate.modulus)?;
    let ones = Assignment(vec![true; n]);
    let mut other = ones.clone();
    for i in idx {
        other.0[i] = false;
    }
    Ok((ones, other))
}

/// Möbius inversion of a truth table over GF(p); monomial `S` gets
/// `Σ_{T ⊆ S} (-1)^{|S∖T|} f(T)`.
pub fn polynomial_from_truth_table(p: u64, n: usize, table: &[u64]) -> SparsePolynomial {
    assert_eq!(table.len(), 1usize << n);
    let mut a: Vec<u64> = table.iter().map(|v| v % p).collect();
    for i in 0..n {
        for m in 0..a.len() {
            if m >> i & 1 == 1 {
                a[m] = mod_sub(a[m], a[m ^ (1 << i)], p);
            }
        }
    }
    SparsePolynomial::from_terms(p, n, a.into_iter().enumerate().map(|(m, c)| (m as u64, c)))
}

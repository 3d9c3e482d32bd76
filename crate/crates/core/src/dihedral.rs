//! Equations over dihedral groups `D_m` with `m` odd.
//!
//! A 3-CNF `Φ` becomes a group polynomial `T^Φ` built from unary polynomials
//! `e`, `e_j` and `b_j`; `T^Φ(x) = 1` has a solution iff `Φ` is satisfiable.

use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use crate::circuit::Modulus;
use crate::cnf::{CnfFormula, Lit};
use crate::compiler::{depth2_plan, CompileError};
use crate::exec;
use crate::zpq::{cnf_pseudo_expr, conjunction_expr, ZpqError, ZpqExpression};

pub const POLSAT_MAX_ARITY: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DihedralError {
    #[error("modulus {0} is even; only odd m ≥ 3 are supported")]
    EvenModulus(u64),
    #[error("modulus must be at least 3, got {0}")]
    TooSmall(u64),
    #[error("modulus {m} has {omega} distinct prime factors, at least 2 required")]
    Omega { m: u64, omega: usize },
    #[error("prime index {index} out of range for {count} primes")]
    Index { index: usize, count: usize },
    #[error("expected {expected} arguments, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("arity {n} exceeds the search limit {limit}")]
    Guard { n: usize, limit: usize },
    #[error("polynomials live over different groups or arities")]
    Mismatch,
    #[error("expression for prime {j} must be a Z[2,{want}]-expression over {n} variables")]
    Expression { j: usize, want: u64, n: usize },
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Zpq(#[from] ZpqError),
}

/// `σ^s ρ^r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DihedralElement {
    pub reflect: bool,
    pub rot: u64,
}

/// `D_m`: rotation `ρ` of order `m`, reflection `σ`, `σρ = ρ⁻¹σ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DihedralGroup {
    m: u64,
}

impl DihedralGroup {
    pub fn new(m: u64) -> Result<Self, DihedralError> {
        if m < 3 {
            return Err(DihedralError::TooSmall(m));
        }
        if m.is_multiple_of(2) {
            return Err(DihedralError::EvenModulus(m));
        }
        Ok(Self { m })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn order(&self) -> u64 {
        2 * self.m
    }

    pub fn identity(&self) -> DihedralElement {
        DihedralElement { reflect: false, rot: 0 }
    }

    pub fn sigma(&self) -> DihedralElement {
        DihedralElement { reflect: true, rot: 0 }
    }

    pub fn rho_pow(&self, k: u64) -> DihedralElement {
        DihedralElement { reflect: false, rot: k % self.m }
    }

    pub fn element(&self, reflect: bool, rot: u64) -> DihedralElement {
        DihedralElement { reflect, rot: rot % self.m }
    }

    /// Rotations first, then reflections.
    pub fn elements(&self) -> impl Iterator<Item = DihedralElement> + '_ {
        [false, true].into_iter().flat_map(move |s| (0..self.m).map(move |r| self.element(s, r)))
    }

    pub fn mul(&self, a: DihedralElement, b: DihedralElement) -> DihedralElement {
        let r1 = if b.reflect { (self.m - a.rot) % self.m } else { a.rot };
        DihedralElement { reflect: a.reflect ^ b.reflect, rot: (r1 + b.rot) % self.m }
    }

    pub fn inv(&self, a: DihedralElement) -> DihedralElement {
        if a.reflect {
            a
        } else {
            self.rho_pow(self.m - a.rot)
        }
    }

    pub fn pow(&self, a: DihedralElement, mut e: u64) -> DihedralElement {
        let mut acc = self.identity();
        let mut base = a;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    pub fn product(&self, items: impl IntoIterator<Item = DihedralElement>) -> DihedralElement {
        items.into_iter().fold(self.identity(), |acc, x| self.mul(acc, x))
    }

    /// `e(x) = σ(σx^m)^m`, with range `{1, σ}`.
    pub fn e(&self, x: DihedralElement) -> DihedralElement {
        let s = self.sigma();
        self.mul(s, self.pow(self.mul(s, self.pow(x, self.m)), self.m))
    }

    pub fn primes(&self) -> Vec<u64> {
        Modulus::new(self.m).primes()
    }

    fn prime(&self, j: usize) -> Result<u64, DihedralError> {
        let ps = self.primes();
        ps.get(j).copied().ok_or(DihedralError::Index { index: j, count: ps.len() })
    }

    /// `ρ_j = ρ^{m/p_j}`, of order `p_j` (0-based `j`, primes increasing).
    pub fn rho_j(&self, j: usize) -> Result<DihedralElement, DihedralError> {
        Ok(self.rho_pow(self.m / self.prime(j)?))
    }

    /// `e_j(x) = x^{2m/p_j}`.
    pub fn e_j(&self, j: usize, x: DihedralElement) -> Result<DihedralElement, DihedralError> {
        Ok(self.pow(x, 2 * self.m / self.prime(j)?))
    }

    /// `b_j(x) = (ρ_j e(x) ρ_j⁻¹ e(x)⁻¹)^{(m+1)/2}`.
    pub fn b_j(&self, j: usize, x: DihedralElement) -> Result<DihedralElement, DihedralError> {
        let rj = self.rho_j(j)?;
        let ex = self.e(x);
        let comm = self.product([rj, ex, self.inv(rj), self.inv(ex)]);
        Ok(self.pow(comm, self.m.div_ceil(2)))
    }
}

impl fmt::Display for DihedralElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.reflect, self.rot) {
            (false, 0) => f.write_str("1"),
            (true, 0) => f.write_str("s"),
            (false, r) => write!(f, "r^{r}"),
            (true, r) => write!(f, "s*r^{r}"),
        }
    }
}

/// `T(x) = Π_j Π_{(β,c,α)} b_j(σ^{c'} Π_{i∈β} e(x_i))^α` with
/// `c' = c + |β|`, so a rotation argument plays the boolean value 1.
///
/// Expression `j` is a `Z[2, p_j]`-expression over the boolean values of the
/// arguments; its value is carried by the order-`p_j` rotations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DihedralPolynomial {
    group: DihedralGroup,
    n: usize,
    primes: Vec<u64>,
    exprs: Vec<ZpqExpression>,
}

impl DihedralPolynomial {
    pub fn new(m: u64, n: usize, exprs: Vec<ZpqExpression>) -> Result<Self, DihedralError> {
        let group = DihedralGroup::new(m)?;
        let primes = group.primes();
        if exprs.len() != primes.len() {
            return Err(DihedralError::Index { index: exprs.len(), count: primes.len() });
        }
        for (j, (t, &p)) in exprs.iter().zip(&primes).enumerate() {
            if t.p() != 2 || t.q() != p || t.arity() != n {
                return Err(DihedralError::Expression { j, want: p, n });
            }
        }
        Ok(Self { group, n, primes, exprs })
    }

    pub fn group(&self) -> &DihedralGroup {
        &self.group
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn expressions(&self) -> &[ZpqExpression] {
        &self.exprs
    }

    /// Literal evaluation through `e` and `b_j`.
    pub fn eval(&self, x: &[DihedralElement]) -> Result<DihedralElement, DihedralError> {
        if x.len() != self.n {
            return Err(DihedralError::Arity { expected: self.n, got: x.len() });
        }
        let g = &self.group;
        let ex: Vec<DihedralElement> = x.iter().map(|&xi| g.e(xi)).collect();
        let mut acc = g.identity();
        for (j, t) in self.exprs.iter().enumerate() {
            for term in t.terms() {
                let weight: u32 = term.beta.iter().sum();
                let c = (term.c + weight) % 2;
                let word = g.product(
                    std::iter::once(g.pow(g.sigma(), c as u64))
                        .chain(term.beta.iter().zip(&ex).filter(|(&b, _)| b % 2 == 1).map(|(_, &e)| e)),
                );
                acc = g.mul(acc, g.pow(g.b_j(j, word)?, term.alpha));
            }
        }
        Ok(acc)
    }

    /// Evaluation on `{1, σ}^n`: bit `i` of `mask` set means `x_{i+1} = 1`.
    pub fn eval_mask(&self, mask: u64) -> DihedralElement {
        let x = bool_point(&self.group, self.n, mask);
        self.eval(&x).expect("arity matches")
    }

    /// The same value through the expressions: `ρ^{Σ (m/p_j) t_j(a)}`.
    pub fn eval_boolean(&self, a: u64) -> DihedralElement {
        let m = self.group.m;
        let rot = self.exprs.iter().zip(&self.primes).fold(0, |s, (t, &p)| (s + (m / p) * t.eval_mask(a)) % m);
        self.group.rho_pow(rot)
    }

    /// `T'(x) = T(x')` where `x'` swaps the boolean value of every flipped
    /// variable: `c` gains `Σ_{i flipped} β_i`.
    pub fn translate(&self, flips: &[bool]) -> Result<Self, DihedralError> {
        if flips.len() != self.n {
            return Err(DihedralError::Arity { expected: self.n, got: flips.len() });
        }
        let exprs = self
            .exprs
            .iter()
            .map(|t| {
                let terms = t.terms().iter().map(|term| {
                    let shift: u32 = term.beta.iter().zip(flips).filter(|(_, &f)| f).map(|(&b, _)| b).sum();
                    (term.beta.clone(), (term.c + shift) % 2, term.alpha)
                });
                ZpqExpression::from_terms(2, t.q(), self.n, terms)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(self.group.m, self.n, exprs)
    }

    /// Adds `expr` to the expression of prime index `j`.
    pub fn plus_at(&self, j: usize, expr: &ZpqExpression) -> Result<Self, DihedralError> {
        let mut exprs = self.exprs.clone();
        let slot = exprs.get_mut(j).ok_or(DihedralError::Index { index: j, count: self.primes.len() })?;
        *slot = slot.plus(expr)?;
        Self::new(self.group.m, self.n, exprs)
    }

    /// Word length with every constant (`σ`, `ρ_j`, `ρ_j⁻¹`) and every
    /// variable occurrence counted as one letter.
    pub fn flattened_length(&self) -> u128 {
        let m = self.group.m as u128;
        let e_len = |y: u128| 1u128.saturating_add(m.saturating_mul(1u128.saturating_add(m.saturating_mul(y))));
        let one_e = e_len(1);
        let mut total = 0u128;
        for t in &self.exprs {
            for term in t.terms() {
                let weight: u32 = term.beta.iter().sum();
                let c = ((term.c + weight) % 2) as u128;
                let w = c.saturating_add((weight as u128).saturating_mul(one_e));
                let b = (m.div_ceil(2)).saturating_mul(2u128.saturating_add(2u128.saturating_mul(e_len(w))));
                total = total.saturating_add(b.saturating_mul(term.alpha as u128));
            }
        }
        total
    }

    pub fn summary_json(&self) -> Value {
        json!({
            "m": self.group.m,
            "arity": self.n,
            "primes": self.primes,
            "terms": self.exprs.iter().map(ZpqExpression::len).collect::<Vec<_>>(),
            "flattened_length": self.flattened_length().to_string(),
        })
    }
}

/// The boolean point of `{1, σ}^n` encoded by `mask` (1 ↦ identity).
pub fn bool_point(g: &DihedralGroup, n: usize, mask: u64) -> Vec<DihedralElement> {
    (0..n).map(|i| if mask >> i & 1 == 1 { g.identity() } else { g.sigma() }).collect()
}

/// `T^Φ` with `t_j = t^Φ_{2,p_j}` and exponents bracketing `ℓ^{1/ω}`.
pub fn cnf_to_dihedral(phi: &CnfFormula, m: u64) -> Result<DihedralPolynomial, DihedralError> {
    let group = DihedralGroup::new(m)?;
    let omega = Modulus::new(m).omega();
    if omega < 2 {
        return Err(DihedralError::Omega { m, omega });
    }
    let plan = depth2_plan(m, phi.num_clauses())?;
    let exprs = plan
        .primes
        .iter()
        .zip(&plan.nu)
        .map(|(&p, &nu)| cnf_pseudo_expr(phi, 2, p, nu))
        .collect::<Result<Vec<_>, _>>()?;
    DihedralPolynomial::new(group.m, phi.num_vars, exprs)
}

/// Search `{1, σ}^n` for `T(x) = target`; values depend on the arguments
/// only through `e`, so this covers `D_m^n`.
pub fn polsat_brute(
    t: &DihedralPolynomial,
    target: DihedralElement,
) -> Result<Option<Vec<DihedralElement>>, DihedralError> {
    polsat_with(t.n, t.group(), |mask| t.eval_mask(mask) == target)
}

fn polsat_with(
    n: usize,
    g: &DihedralGroup,
    hit: impl Fn(u64) -> bool + Sync + Send,
) -> Result<Option<Vec<DihedralElement>>, DihedralError> {
    if n > POLSAT_MAX_ARITY {
        return Err(DihedralError::Guard { n, limit: POLSAT_MAX_ARITY });
    }
    Ok(exec::find_first(0..1u64 << n, hit).map(|mask| bool_point(g, n, mask)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Equivalence {
    Equal,
    /// A point where the polynomials differ, and `t(x)·s(x)⁻¹` there.
    Differ { point: Vec<DihedralElement>, quotient: DihedralElement },
}

/// Solves `t(x)·s(x)⁻¹ = a` for every `a ≠ 1`; equal iff none is solvable.
pub fn poleqv_check(t: &DihedralPolynomial, s: &DihedralPolynomial) -> Result<Equivalence, DihedralError> {
    if t.group != s.group || t.n != s.n {
        return Err(DihedralError::Mismatch);
    }
    let g = t.group;
    let quotient = |mask: u64| g.mul(t.eval_mask(mask), g.inv(s.eval_mask(mask)));
    for a in g.elements().filter(|&a| a != g.identity()) {
        if let Some(point) = polsat_with(t.n, &g, |mask| quotient(mask) == a)? {
            return Ok(Equivalence::Differ { point, quotient: a });
        }
    }
    Ok(Equivalence::Equal)
}

/// A `Z[2, p]`-expression equal to 1 exactly at the boolean point `mask`.
pub fn point_indicator(p: u64, n: usize, mask: u64) -> Result<ZpqExpression, DihedralError> {
    let lits: Vec<Lit> = (0..n).map(|i| Lit::new(i, mask >> i & 1 == 1)).collect();
    Ok(conjunction_expr(2, p, n, &lits)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::brute_force_formula_sat;

    #[test]
    fn group_law_examples() {
        let g = DihedralGroup::new(3).unwrap();
        assert_eq!(g.mul(g.sigma(), g.sigma()), g.identity());
        let sr = g.element(true, 1);
        let sr2 = g.element(true, 2);
        assert_eq!(g.mul(sr, sr2), g.rho_pow(1));
        // σρ = ρ⁻¹σ
        assert_eq!(g.mul(g.sigma(), g.rho_pow(1)), g.mul(g.rho_pow(2), g.sigma()));
        assert_eq!(DihedralGroup::new(6), Err(DihedralError::EvenModulus(6)));
    }

    #[test]
    fn axioms_hold() {
        for m in [3, 9, 15, 45] {
            let g = DihedralGroup::new(m).unwrap();
            let els: Vec<_> = g.elements().collect();
            assert_eq!(els.len() as u64, g.order());
            for &a in &els {
                assert_eq!(g.mul(a, g.inv(a)), g.identity());
                assert_eq!(g.mul(a, g.identity()), a);
            }
            if m <= 15 {
                for &a in &els {
                    for &b in &els {
                        for &c in &els {
                            assert_eq!(g.mul(g.mul(a, b), c), g.mul(a, g.mul(b, c)));
                        }
                    }
                }
            }
            // rotations form Z_m
            assert_eq!(g.pow(g.rho_pow(1), m), g.identity());
            assert!((1..m).all(|k| g.pow(g.rho_pow(1), k) != g.identity()));
        }
    }

    #[test]
    fn unary_ranges() {
        let g = DihedralGroup::new(15).unwrap();
        assert_eq!(g.e(g.rho_pow(2)), g.identity());
        assert_eq!(g.e(g.element(true, 5)), g.sigma());
        for j in 0..2 {
            let rj = g.rho_j(j).unwrap();
            let p = g.primes()[j];
            for x in g.elements() {
                let y = g.e_j(j, x).unwrap();
                assert!(!y.reflect && g.pow(y, p) == g.identity());
                assert!([g.identity(), g.sigma()].contains(&g.e(x)));
            }
            assert_eq!(g.b_j(j, g.sigma()).unwrap(), rj);
            assert_eq!(g.b_j(j, g.identity()).unwrap(), g.identity());
        }
    }

    #[test]
    fn two_units_need_two_rotations() {
        let phi = CnfFormula::and(2);
        let t = cnf_to_dihedral(&phi, 15).unwrap();
        let g = *t.group();
        for mask in 0..4 {
            assert_eq!(t.eval_mask(mask) == g.identity(), mask == 3, "mask={mask}");
            assert_eq!(t.eval_mask(mask), t.eval_boolean(mask));
        }
        let sol = polsat_brute(&t, g.identity()).unwrap().unwrap();
        assert_eq!(t.eval(&sol).unwrap(), g.identity());
        assert_eq!(polsat_brute(&t, g.sigma()).unwrap(), None);
    }

    #[test]
    fn contradiction_has_no_solution() {
        let phi = CnfFormula::new(1, vec![vec![Lit::new(0, true)], vec![Lit::new(0, false)]]).unwrap();
        let t = cnf_to_dihedral(&phi, 15).unwrap();
        assert_eq!(polsat_brute(&t, t.group().identity()).unwrap(), None);
        assert_eq!(brute_force_formula_sat(&phi), None);
    }

    #[test]
    fn depends_only_through_e() {
        let phi = CnfFormula::new(3, vec![vec![Lit::new(0, true), Lit::new(1, false)], vec![Lit::new(2, true)]]).unwrap();
        let t = cnf_to_dihedral(&phi, 15).unwrap();
        let g = *t.group();
        let els: Vec<_> = g.elements().collect();
        for &a in &els {
            for &b in &els {
                for &c in &els {
                    let x = [a, b, c];
                    let proj: Vec<_> = x.iter().map(|&v| g.e(v)).collect();
                    assert_eq!(t.eval(&x).unwrap(), t.eval(&proj).unwrap());
                }
            }
        }
    }

    #[test]
    fn equivalence_checks() {
        let phi = CnfFormula::new(3, vec![vec![Lit::new(0, true), Lit::new(1, true)], vec![Lit::new(2, false)]]).unwrap();
        let t = cnf_to_dihedral(&phi, 15).unwrap();
        assert_eq!(poleqv_check(&t, &t).unwrap(), Equivalence::Equal);
        let bump = point_indicator(3, 3, 0b101).unwrap();
        let s = t.plus_at(0, &bump).unwrap();
        match poleqv_check(&t, &s).unwrap() {
            Equivalence::Differ { point, .. } => assert_eq!(point, bool_point(t.group(), 3, 0b101)),
            Equivalence::Equal => panic!("missed the bumped point"),
        }
        let shifted = t.translate(&[true, false, false]).unwrap();
        for mask in 0..8 {
            assert_eq!(shifted.eval_mask(mask), t.eval_mask(mask ^ 1));
        }
        assert!(matches!(poleqv_check(&t, &shifted).unwrap(), Equivalence::Differ { .. }));
    }

    #[test]
    fn length_is_reported() {
        let t = cnf_to_dihedral(&CnfFormula::and(2), 15).unwrap();
        assert!(t.flattened_length() > 0);
        assert_eq!(t.summary_json()["primes"], json!([3, 5]));
    }
}

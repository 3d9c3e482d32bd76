//! 3-CNF formulas, DIMACS input, and a truth-table SAT oracle.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::exec;

/// A literal over variable `var` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit {
    pub var: usize,
    pub positive: bool,
}

impl Lit {
    pub fn new(var: usize, positive: bool) -> Self {
        Self { var, positive }
    }

    pub fn negated(self) -> Self {
        Self { var: self.var, positive: !self.positive }
    }

    pub fn eval_mask(self, mask: u64) -> bool {
        (mask >> self.var & 1 == 1) == self.positive
    }

    pub fn to_dimacs(self) -> i64 {
        let v = self.var as i64 + 1;
        if self.positive {
            v
        } else {
            -v
        }
    }
}

pub const MAX_CLAUSE_WIDTH: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    pub num_vars: usize,
    pub clauses: Vec<Vec<Lit>>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CnfError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("clause {clause} is empty")]
    EmptyClause { clause: usize },
    #[error("clause {clause} has {width} literals, at most 3 allowed")]
    TooWide { clause: usize, width: usize },
    #[error("clause {clause} mentions variable {var}, formula has {num_vars}")]
    VarOutOfRange { clause: usize, var: usize, num_vars: usize },
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<Vec<Lit>>) -> Result<Self, CnfError> {
        for (i, c) in clauses.iter().enumerate() {
            if c.is_empty() {
                return Err(CnfError::EmptyClause { clause: i });
            }
            if c.len() > MAX_CLAUSE_WIDTH {
                return Err(CnfError::TooWide { clause: i, width: c.len() });
            }
            if let Some(l) = c.iter().find(|l| l.var >= num_vars) {
                return Err(CnfError::VarOutOfRange { clause: i, var: l.var, num_vars });
            }
        }
        Ok(Self { num_vars, clauses })
    }

    /// `x_1 ∧ … ∧ x_n` as unit clauses.
    pub fn and(n: usize) -> Self {
        Self { num_vars: n, clauses: (0..n).map(|i| vec![Lit::new(i, true)]).collect() }
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clause_satisfied(clause: &[Lit], mask: u64) -> bool {
        clause.iter().any(|l| l.eval_mask(mask))
    }

    pub fn count_unsatisfied(&self, mask: u64) -> usize {
        self.clauses.iter().filter(|c| !Self::clause_satisfied(c, mask)).count()
    }

    pub fn satisfied_by(&self, mask: u64) -> bool {
        self.clauses.iter().all(|c| Self::clause_satisfied(c, mask))
    }

    pub fn parse_dimacs(text: &str) -> Result<Self, CnfError> {
        let err = |line: usize, message: String| CnfError::Parse { line, message };
        let mut header: Option<(usize, usize, usize)> = None;
        let mut clauses: Vec<Vec<Lit>> = Vec::new();
        let mut current: Vec<Lit> = Vec::new();
        let mut current_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if line.starts_with('p') {
                if header.is_some() {
                    return Err(err(line_no, "duplicate header".into()));
                }
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                    return Err(err(line_no, format!("expected \"p cnf <vars> <clauses>\", got {line:?}")));
                }
                let n = parts[2].parse().map_err(|_| err(line_no, format!("bad variable count {:?}", parts[2])))?;
                let l = parts[3].parse().map_err(|_| err(line_no, format!("bad clause count {:?}", parts[3])))?;
                header = Some((n, l, line_no));
                continue;
            }
            let (n, _, _) = header.ok_or_else(|| err(line_no, "clause before \"p cnf\" header".into()))?;
            for tok in line.split_whitespace() {
                let v: i64 = tok.parse().map_err(|_| err(line_no, format!("bad literal {tok:?}")))?;
                if v == 0 {
                    if current.is_empty() {
                        return Err(err(line_no, "empty clause".into()));
                    }
                    clauses.push(std::mem::take(&mut current));
                    continue;
                }
                let var = v.unsigned_abs() as usize;
                if var > n {
                    return Err(err(line_no, format!("variable {var} exceeds declared count {n}")));
                }
                if current.is_empty() {
                    current_line = line_no;
                }
                current.push(Lit::new(var - 1, v > 0));
                if current.len() > MAX_CLAUSE_WIDTH {
                    return Err(err(line_no, format!("clause has more than {MAX_CLAUSE_WIDTH} literals")));
                }
            }
        }
        let (n, l, hline) = header.ok_or_else(|| err(text.lines().count().max(1), "missing \"p cnf\" header".into()))?;
        if !current.is_empty() {
            return Err(err(current_line, "clause not terminated by 0".into()));
        }
        if clauses.len() != l {
            return Err(err(hline, format!("header declares {l} clauses, found {}", clauses.len())));
        }
        Self::new(n, clauses)
    }

    pub fn to_dimacs(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for CnfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "p cnf {} {}", self.num_vars, self.clauses.len())?;
        for c in &self.clauses {
            for l in c {
                write!(f, "{} ", l.to_dimacs())?;
            }
            writeln!(f, "0")?;
        }
        Ok(())
    }
}

/// First satisfying assignment in mask order, by full enumeration.
pub fn brute_force_formula_sat(phi: &CnfFormula) -> Option<u64> {
    assert!(phi.num_vars <= 30, "formula oracle limited to 30 variables");
    exec::find_first(0..1u64 << phi.num_vars, |m| phi.satisfied_by(m))
}

/// Clauses of width 1..=3 over distinct variables, uniformly signed.
pub fn random_3cnf<R: Rng + ?Sized>(rng: &mut R, n: usize, l: usize) -> CnfFormula {
    assert!(n >= 1);
    let clauses = (0..l)
        .map(|_| {
            let width = rng.random_range(1..=MAX_CLAUSE_WIDTH.min(n));
            let vars = rand::seq::index::sample(rng, n, width);
            vars.iter().map(|v| Lit::new(v, rng.random_bool(0.5))).collect()
        })
        .collect();
    CnfFormula { num_vars: n, clauses }
}

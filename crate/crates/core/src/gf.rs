//! Scalar arithmetic over `Z_m` and `GF(p)`, Lucas binomials, affine forms,
//! function tables, and a dense linear solver over `GF(q)`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GfError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("matrix shape mismatch: {rows} rows but right-hand side of length {rhs}")]
    ShapeMismatch { rows: usize, rhs: usize },
    #[error("function table of length {len} does not match {p}^{n}")]
    TableLength { p: u64, n: usize, len: usize },
    #[error("value {value} out of range for modulus {modulus}")]
    ValueOutOfRange { value: u64, modulus: u64 },
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Prime factorization by trial division, primes in increasing order.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            let mut e = 0;
            while n.is_multiple_of(d) {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

#[inline]
pub fn mod_mul(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

#[inline]
pub fn mod_add(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 + b as u128) % m as u128) as u64
}

#[inline]
pub fn mod_sub(a: u64, b: u64, m: u64) -> u64 {
    mod_add(a % m, m - b % m, m)
}

#[inline]
pub fn mod_neg(a: u64, m: u64) -> u64 {
    (m - a % m) % m
}

pub fn mod_pow(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mod_mul(acc, base, m);
        }
        base = mod_mul(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Inverse modulo a prime `p` (Fermat). `a` must be nonzero mod `p`.
pub fn mod_inv(a: u64, p: u64) -> u64 {
    debug_assert!(!a.is_multiple_of(p), "zero has no inverse");
    mod_pow(a, p - 2, p)
}

/// Integer `e`-th root, rounded down.
pub fn integer_root(x: u64, e: u32) -> u64 {
    if e == 0 {
        panic!("zeroth root");
    }
    if e == 1 || x < 2 {
        return x;
    }
    let mut lo = 0u64;
    let mut hi = 1u64 << (64 / e + 1).min(63);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        match mid.checked_pow(e) {
            Some(v) if v <= x => lo = mid,
            _ => hi = mid - 1,
        }
    }
    lo
}

/// Smallest `k >= 1` with `k^e >= n`.
pub fn ceil_root(n: u64, e: u32) -> u64 {
    let r = integer_root(n, e).max(1);
    if r.checked_pow(e).is_some_and(|v| v >= n) {
        r
    } else {
        r + 1
    }
}

/// `C(a, b) mod p` for `a, b < p`.
fn small_binomial(a: u64, b: u64, p: u64) -> u64 {
    if b > a {
        return 0;
    }
    let b = b.min(a - b);
    let mut num = 1u64;
    let mut den = 1u64;
    for i in 0..b {
        num = mod_mul(num, (a - i) % p, p);
        den = mod_mul(den, (i + 1) % p, p);
    }
    mod_mul(num, mod_inv(den, p), p)
}

/// `C(i, j) mod p` as the product of binomials of base-`p` digits.
pub fn lucas_binomial(p: u64, mut i: u64, mut j: u64) -> u64 {
    let mut acc = 1u64;
    while j > 0 || i > 0 {
        let (di, dj) = (i % p, j % p);
        if dj > di {
            return 0;
        }
        acc = mod_mul(acc, small_binomial(di, dj, p), p);
        i /= p;
        j /= p;
    }
    acc % p
}

/// `C(i, j) mod m` for any modulus, via Pascal's rule. Meant for small `i`.
pub fn binomial_mod(i: u64, j: u64, m: u64) -> u64 {
    if j > i {
        return 0;
    }
    let j = j.min(i - j) as usize;
    let mut row = vec![0u64; j + 1];
    row[0] = 1 % m;
    for r in 1..=i as usize {
        for c in (1..=j.min(r)).rev() {
            row[c] = mod_add(row[c], row[c - 1], m);
        }
    }
    row[j]
}

/// `Σ β_i x_i + c` over `Z_p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize)]
pub struct AffineForm {
    pub p: u64,
    pub beta: Vec<u64>,
    pub c: u64,
}

impl AffineForm {
    pub fn new(p: u64, beta: Vec<u64>, c: u64) -> Self {
        let beta = beta.into_iter().map(|b| b % p).collect();
        Self { p, beta, c: c % p }
    }

    pub fn arity(&self) -> usize {
        self.beta.len()
    }

    pub fn eval(&self, x: &[u64]) -> Result<u64, GfError> {
        if x.len() != self.beta.len() {
            return Err(GfError::ArityMismatch { expected: self.beta.len(), got: x.len() });
        }
        let mut acc = self.c;
        for (&b, &xi) in self.beta.iter().zip(x) {
            acc = mod_add(acc, mod_mul(b, xi % self.p, self.p), self.p);
        }
        Ok(acc)
    }

    /// Evaluation on a boolean point given as a bitmask (`x_i` = bit `i`).
    pub fn eval_mask(&self, mask: u64) -> u64 {
        let mut acc = self.c;
        for (i, &b) in self.beta.iter().enumerate() {
            if mask >> i & 1 == 1 {
                acc += b;
            }
        }
        acc % self.p
    }
}

pub fn eval_affine(form: &AffineForm, x: &[u64]) -> Result<u64, GfError> {
    form.eval(x)
}

/// A total function `Z_p^n -> Z_q` stored densely.
///
/// Index convention: `index = Σ x_i · p^{n-i}` for 1-based `i`, so `x_1` is the
/// most significant digit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionTable {
    pub p: u64,
    pub n: usize,
    pub q: u64,
    pub values: Vec<u64>,
}

impl FunctionTable {
    pub fn new(p: u64, n: usize, q: u64, values: Vec<u64>) -> Result<Self, GfError> {
        let len = table_len(p, n).ok_or(GfError::TableLength { p, n, len: values.len() })?;
        if values.len() != len {
            return Err(GfError::TableLength { p, n, len: values.len() });
        }
        if let Some(&v) = values.iter().find(|&&v| v >= q) {
            return Err(GfError::ValueOutOfRange { value: v, modulus: q });
        }
        Ok(Self { p, n, q, values })
    }

    pub fn from_fn(p: u64, n: usize, q: u64, mut f: impl FnMut(&[u64]) -> u64) -> Self {
        let len = table_len(p, n).expect("table too large");
        let values = (0..len).map(|idx| f(&point_of_index(p, n, idx)) % q).collect();
        Self { p, n, q, values }
    }

    pub fn get(&self, x: &[u64]) -> u64 {
        self.values[index_of_point(self.p, x)]
    }
}

fn table_len(p: u64, n: usize) -> Option<usize> {
    (p as usize).checked_pow(n as u32)
}

/// Mixed-radix digits of `idx`, most significant first.
pub fn point_of_index(p: u64, n: usize, mut idx: usize) -> Vec<u64> {
    let mut x = vec![0u64; n];
    for slot in x.iter_mut().rev() {
        *slot = (idx % p as usize) as u64;
        idx /= p as usize;
    }
    x
}

pub fn index_of_point(p: u64, x: &[u64]) -> usize {
    x.iter().fold(0usize, |acc, &xi| acc * p as usize + (xi % p) as usize)
}

/// Solve `A x = b` over `GF(q)` by Gauss-Jordan elimination.
///
/// Pivots are taken at the lowest row index within the lowest column index
/// that still has a nonzero entry; free variables are set to zero. Returns
/// `Ok(None)` when the system is inconsistent.
pub fn solve_gf_system(a: &[Vec<u64>], b: &[u64], q: u64) -> Result<Option<Vec<u64>>, GfError> {
    if !is_prime(q) {
        return Err(GfError::NotPrime(q));
    }
    if a.len() != b.len() {
        return Err(GfError::ShapeMismatch { rows: a.len(), rhs: b.len() });
    }
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut m: Vec<Vec<u64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r: Vec<u64> = row.iter().map(|v| v % q).collect();
            r.resize(cols, 0);
            r.push(rhs % q);
            r
        })
        .collect();

    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(pr) = (r..rows).find(|&i| m[i][c] != 0) else {
            continue;
        };
        m.swap(r, pr);
        let inv = mod_inv(m[r][c], q);
        for v in m[r].iter_mut() {
            *v = mod_mul(*v, inv, q);
        }
        let pivot_row = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != r && row[c] != 0 {
                let f = row[c];
                for (v, &pv) in row.iter_mut().zip(&pivot_row).skip(c) {
                    *v = mod_sub(*v, mod_mul(f, pv, q), q);
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    if m[r..].iter().any(|row| row[cols] != 0) {
        return Ok(None);
    }
    let mut x = vec![0u64; cols];
    for (i, &c) in pivots.iter().enumerate() {
        x[c] = m[i][cols];
    }
    Ok(Some(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn factorial_binomial(i: u64, j: u64) -> u128 {
        // exact for i <= 60 via multiplicative formula on u128
        if j > i {
            return 0;
        }
        let j = j.min(i - j);
        let mut acc: u128 = 1;
        for k in 0..j {
            acc = acc * (i - k) as u128 / (k + 1) as u128;
        }
        acc
    }

    #[test]
    fn lucas_examples() {
        for p in [2, 3, 5, 7] {
            for i in 0..20 {
                assert_eq!(lucas_binomial(p, i, 0), 1);
            }
        }
        assert_eq!(lucas_binomial(3, 9, 4), 0);
        assert_eq!(lucas_binomial(2, 5, 2), 0);
    }

    #[test]
    fn lucas_matches_exact_binomials() {
        for p in [2u64, 3, 5, 7, 11] {
            for i in 0..=60u64 {
                for j in 0..=i {
                    let exact = (factorial_binomial(i, j) % p as u128) as u64;
                    assert_eq!(lucas_binomial(p, i, j), exact, "C({i},{j}) mod {p}");
                }
            }
        }
    }

    #[test]
    fn lucas_periodicity() {
        for p in [2u64, 3, 5] {
            for k in 1..=2u32 {
                let pk = p.pow(k);
                for i in 0..=40 {
                    for j in 0..pk {
                        assert_eq!(lucas_binomial(p, i + pk, j), lucas_binomial(p, i, j));
                    }
                }
            }
        }
    }

    #[test]
    fn binomial_mod_agrees_with_lucas() {
        for i in 0..30 {
            for j in 0..=i {
                assert_eq!(binomial_mod(i, j, 7), lucas_binomial(7, i, j));
            }
        }
        assert_eq!(binomial_mod(10, 3, 1000), 120);
    }

    #[test]
    fn solve_identity_and_zero() {
        let id: Vec<Vec<u64>> = (0..4).map(|i| (0..4).map(|j| (i == j) as u64).collect()).collect();
        let b = vec![1, 2, 0, 4];
        assert_eq!(solve_gf_system(&id, &b, 5).unwrap(), Some(b.clone()));
        let zero = vec![vec![0u64; 3]; 3];
        assert_eq!(solve_gf_system(&zero, &[0, 1, 0], 5).unwrap(), None);
        assert_eq!(solve_gf_system(&zero, &[0, 0, 0], 5).unwrap(), Some(vec![0, 0, 0]));
        assert_eq!(solve_gf_system(&id, &b, 4), Err(GfError::NotPrime(4)));
    }

    #[test]
    fn solve_planted_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let a: Vec<Vec<u64>> = (0..8).map(|_| (0..12).map(|_| rng.random_range(0..3)).collect()).collect();
            let planted: Vec<u64> = (0..12).map(|_| rng.random_range(0..3)).collect();
            let b: Vec<u64> = a
                .iter()
                .map(|row| row.iter().zip(&planted).map(|(x, y)| x * y).sum::<u64>() % 3)
                .collect();
            let x = solve_gf_system(&a, &b, 3).unwrap().expect("consistent");
            for (row, &rhs) in a.iter().zip(&b) {
                let lhs: u64 = row.iter().zip(&x).map(|(u, v)| u * v).sum::<u64>() % 3;
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn affine_examples() {
        let f = AffineForm::new(5, vec![0, 0], 2);
        assert_eq!(f.eval(&[3, 4]).unwrap(), 2);
        let g = AffineForm::new(2, vec![1, 1], 0);
        assert_eq!(g.eval(&[1, 1]).unwrap(), 0);
        assert_eq!(g.eval(&[1]), Err(GfError::ArityMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn affine_matches_wide_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p = [2u64, 3, 5, 7, 13][rng.random_range(0..5)];
            let n = rng.random_range(0..8);
            let beta: Vec<u64> = (0..n).map(|_| rng.random_range(0..p)).collect();
            let c = rng.random_range(0..p);
            let x: Vec<u64> = (0..n).map(|_| rng.random_range(0..1000)).collect();
            let wide: u128 = beta.iter().zip(&x).map(|(&b, &v)| b as u128 * v as u128).sum::<u128>() + c as u128;
            let form = AffineForm::new(p, beta, c);
            assert_eq!(form.eval(&x).unwrap() as u128, wide % p as u128);
        }
    }

    #[test]
    fn roots_and_factorization() {
        assert_eq!(integer_root(10, 2), 3);
        assert_eq!(integer_root(27, 3), 3);
        assert_eq!(integer_root(26, 3), 2);
        assert_eq!(ceil_root(8, 3), 2);
        assert_eq!(ceil_root(9, 3), 3);
        assert_eq!(ceil_root(1, 4), 1);
        assert_eq!(factorize(360), vec![(2, 3), (3, 2), (5, 1)]);
        assert_eq!(factorize(1), vec![]);
        assert!(is_prime(97) && !is_prime(91));
    }

    #[test]
    fn mixed_radix_round_trip() {
        for idx in 0..81 {
            let x = point_of_index(3, 4, idx);
            assert_eq!(index_of_point(3, &x), idx);
        }
        assert_eq!(point_of_index(3, 2, 5), vec![1, 2]);
    }
}

//! Exact arithmetic over Z, Z[1/q0] and Z/qZ.
//!
//! Scalars are arbitrary precision. Residue matrices keep their entries in
//! machine words (`q < 2^62`), which is the only regime where enumerating a
//! quotient group is feasible anyway; products go through `u128`.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Largest prime found by trial division when factoring a plain integer.
pub const TRIAL_DIVISION_BOUND: u64 = 1_000_000;

/// Residue matrices require `q` below this bound.
pub const WORD_MODULUS_LIMIT: u64 = 1 << 62;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModError {
    #[error("valuation of zero")]
    ValuationOfZero,
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("modulus not coprime to q0")]
    NotCoprimeToQ0,
    #[error("cannot factor {0}: it has a prime factor beyond the trial-division bound")]
    FactorBound(BigUint),
    #[error("invalid modulus string {0:?}")]
    Parse(String),
    #[error("modulus {0} is too large for word-size residue matrices")]
    TooLarge(BigUint),
    #[error("expected {expected} entries, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("matrix is not invertible over Z[1/q0]")]
    NotInvertible,
    #[error("residue {0} out of range for modulus {1}")]
    OutOfRange(u64, u64),
    #[error("modulus {0} does not divide {1}")]
    NotDivisor(BigUint, BigUint),
}

pub type Result<T> = std::result::Result<T, ModError>;

/// Largest `v` with `p^v | x`.
pub fn valuation(x: &BigInt, p: u64) -> Result<u32> {
    if x.is_zero() {
        return Err(ModError::ValuationOfZero);
    }
    let p = BigInt::from(p);
    let mut x = x.abs();
    let mut v = 0;
    loop {
        let (q, r) = x.div_rem(&p);
        if !r.is_zero() {
            return Ok(v);
        }
        x = q;
        v += 1;
    }
}

/// Word-size variant of [`valuation`].
pub fn valuation_i64(x: i64, p: u64) -> Result<u32> {
    if x == 0 {
        return Err(ModError::ValuationOfZero);
    }
    let mut x = x.unsigned_abs();
    let mut v = 0;
    while x.is_multiple_of(p) {
        x /= p;
        v += 1;
    }
    Ok(v)
}

pub(crate) fn mul_mod(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

pub(crate) fn pow_mod(mut base: u64, mut exp: u64, q: u64) -> u64 {
    let mut acc = 1 % q;
    base %= q;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, q);
        }
        base = mul_mod(base, base, q);
        exp >>= 1;
    }
    acc
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn inv_mod_u64(a: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let (mut old_r, mut r) = (a as i128 % m as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u64)
}

/// Inverse of `a` modulo `m` for arbitrary-precision operands.
pub fn inv_mod(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let a = a.mod_floor(m);
    let e = a.extended_gcd(m);
    if !e.gcd.is_one() {
        return None;
    }
    Some(e.x.mod_floor(m))
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Factor a 64-bit integer by trial division (used for q0 and small moduli).
pub fn factor_u64(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p.saturating_mul(p) <= n {
        if n.is_multiple_of(p) {
            let mut e = 0;
            while n.is_multiple_of(p) {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// A modulus `q = ∏ p_i^{n_i}` kept together with its factorization.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Modulus {
    factors: Vec<(u64, u32)>,
    value: BigUint,
}

impl Modulus {
    /// Builds a modulus from `(prime, exponent)` pairs. Pairs are sorted; a
    /// repeated prime is rejected.
    pub fn from_factors(mut factors: Vec<(u64, u32)>) -> Result<Self> {
        factors.sort_unstable();
        let mut value = BigUint::one();
        for (i, &(p, e)) in factors.iter().enumerate() {
            if !is_prime(p) {
                return Err(ModError::NotPrime(p));
            }
            if e == 0 {
                return Err(ModError::Parse(format!("{p}^0")));
            }
            if i > 0 && factors[i - 1].0 == p {
                return Err(ModError::Parse(format!("repeated prime {p}")));
            }
            value *= BigUint::from(p).pow(e);
        }
        Ok(Modulus { factors, value })
    }

    pub fn prime_power(p: u64, n: u32) -> Result<Self> {
        Self::from_factors(vec![(p, n)])
    }

    /// The trivial modulus `q = 1`.
    pub fn one() -> Self {
        Modulus { factors: Vec::new(), value: BigUint::one() }
    }

    /// Factors `q` by trial division up to [`TRIAL_DIVISION_BOUND`].
    pub fn from_integer(q: &BigUint) -> Result<Self> {
        if q.is_zero() {
            return Err(ModError::Parse("0".into()));
        }
        let mut rest = q.clone();
        let mut factors = Vec::new();
        let mut p = 2u64;
        while p <= TRIAL_DIVISION_BOUND {
            let bp = BigUint::from(p);
            if &bp * &bp > rest {
                break;
            }
            let mut e = 0;
            while (&rest % &bp).is_zero() {
                rest /= &bp;
                e += 1;
            }
            if e > 0 {
                factors.push((p, e));
            }
            p += if p == 2 { 1 } else { 2 };
        }
        if !rest.is_one() {
            // No divisor up to min(bound, sqrt(rest)) means `rest` is prime, as
            // long as the bound reached sqrt(rest).
            let bound = BigUint::from(TRIAL_DIVISION_BOUND);
            let certified = rest <= &bound * &bound || {
                let bp = BigUint::from(p);
                &bp * &bp > rest
            };
            match rest.to_u64() {
                Some(r) if certified => factors.push((r, 1)),
                _ => return Err(ModError::FactorBound(q.clone())),
            }
        }
        Self::from_factors(factors)
    }

    pub fn from_u64(q: u64) -> Result<Self> {
        Self::from_integer(&BigUint::from(q))
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    /// `Some((p, n))` when `q = p^n`.
    pub fn as_prime_power(&self) -> Option<(u64, u32)> {
        match self.factors.as_slice() {
            [single] => Some(*single),
            _ => None,
        }
    }

    /// The value as a machine word, when it fits the residue-matrix regime.
    pub fn word(&self) -> Result<u64> {
        match self.value.to_u64() {
            Some(q) if q < WORD_MODULUS_LIMIT => Ok(q),
            _ => Err(ModError::TooLarge(self.value.clone())),
        }
    }

    /// The prime-power components `p_i^{n_i}` in order.
    pub fn components(&self) -> Vec<BigUint> {
        self.factors
            .iter()
            .map(|&(p, e)| BigUint::from(p).pow(e))
            .collect()
    }

    pub fn is_coprime_to(&self, q0: u64) -> bool {
        self.factors.iter().all(|&(p, _)| !q0.is_multiple_of(p))
    }

    pub fn ensure_coprime_to(&self, q0: u64) -> Result<()> {
        if self.is_coprime_to(q0) {
            Ok(())
        } else {
            Err(ModError::NotCoprimeToQ0)
        }
    }
}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl FromStr for Modulus {
    type Err = ModError;

    /// Accepts `"p1^n1*p2^n2*..."` or a plain integer.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.contains('^') || s.contains('*') {
            let mut factors = Vec::new();
            for part in s.split('*') {
                let part = part.trim();
                let (p, e) = match part.split_once('^') {
                    Some((p, e)) => (p.trim(), e.trim()),
                    None => (part, "1"),
                };
                let p: u64 = p.parse().map_err(|_| ModError::Parse(s.to_string()))?;
                let e: u32 = e.parse().map_err(|_| ModError::Parse(s.to_string()))?;
                factors.push((p, e));
            }
            Self::from_factors(factors)
        } else {
            let q: BigUint = s.parse().map_err(|_| ModError::Parse(s.to_string()))?;
            Self::from_integer(&q)
        }
    }
}

/// Components `x mod p_i^{n_i}`.
pub fn crt_split(x: &BigUint, q: &Modulus) -> Vec<BigUint> {
    q.components().iter().map(|m| x % m).collect()
}

/// Inverse of [`crt_split`]: the unique `x in [0, q)` with the given components.
pub fn crt_combine(residues: &[BigUint], q: &Modulus) -> Result<BigUint> {
    let comps = q.components();
    if residues.len() != comps.len() {
        return Err(ModError::Shape { expected: comps.len(), found: residues.len() });
    }
    let mut x = BigInt::zero();
    let mut m = BigInt::one();
    for (r, mi) in residues.iter().zip(&comps) {
        let mi = BigInt::from(mi.clone());
        let r = BigInt::from(r.clone());
        let inv = inv_mod(&m, &mi).expect("prime-power components are coprime");
        let t = ((r - &x) * inv).mod_floor(&mi);
        x += &m * t;
        m *= mi;
    }
    Ok(x.mod_floor(&m).to_biguint().expect("reduced value is nonnegative"))
}

fn crt_combine_words(residues: &[u64], moduli: &[u64]) -> u64 {
    let mut x: u128 = 0;
    let mut m: u128 = 1;
    for (&r, &mi) in residues.iter().zip(moduli) {
        let inv = inv_mod_u64((m % mi as u128) as u64, mi).expect("coprime components") as u128;
        let diff = (r as u128 + mi as u128 - (x % mi as u128)) % mi as u128;
        let t = diff * inv % mi as u128;
        x += m * t;
        m *= mi as u128;
    }
    x as u64
}

pub(crate) fn det_bareiss(n: usize, entries: &[BigInt]) -> BigInt {
    if n == 0 {
        return BigInt::one();
    }
    let mut a = entries.to_vec();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k * n + k].is_zero() {
            match (k + 1..n).find(|&r| !a[r * n + k].is_zero()) {
                Some(r) => {
                    for c in 0..n {
                        a.swap(k * n + c, r * n + c);
                    }
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &a[i * n + j] * &a[k * n + k] - &a[i * n + k] * &a[k * n + j];
                a[i * n + j] = v / &prev;
            }
        }
        prev = a[k * n + k].clone();
    }
    sign * &a[n * n - 1]
}

fn minor(n: usize, entries: &[BigInt], skip_r: usize, skip_c: usize) -> Vec<BigInt> {
    let mut out = Vec::with_capacity((n - 1) * (n - 1));
    for r in (0..n).filter(|&r| r != skip_r) {
        for c in (0..n).filter(|&c| c != skip_c) {
            out.push(entries[r * n + c].clone());
        }
    }
    out
}

pub(crate) fn adjugate(n: usize, entries: &[BigInt]) -> Vec<BigInt> {
    if n == 1 {
        return vec![BigInt::one()];
    }
    let mut adj = vec![BigInt::zero(); n * n];
    for r in 0..n {
        for c in 0..n {
            let d = det_bareiss(n - 1, &minor(n, entries, r, c));
            adj[c * n + r] = if (r + c) % 2 == 0 { d } else { -d };
        }
    }
    adj
}

/// An integer matrix divided by a power of `q0`, i.e. an element of
/// `M_n(Z[1/q0])`. Stored with the smallest possible exponent so that
/// structural equality is equality over Q.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RationalMatrix {
    dim: usize,
    numerators: Vec<BigInt>,
    q0: u64,
    exponent: u32,
}

impl RationalMatrix {
    pub fn new(dim: usize, numerators: Vec<BigInt>, q0: u64, exponent: u32) -> Result<Self> {
        if numerators.len() != dim * dim {
            return Err(ModError::Shape { expected: dim * dim, found: numerators.len() });
        }
        assert!(q0 >= 1, "q0 must be positive");
        let mut m = RationalMatrix { dim, numerators, q0, exponent };
        m.normalize();
        Ok(m)
    }

    /// Integer matrix (denominator 1) from row-major entries.
    pub fn from_i64(dim: usize, entries: &[i64], q0: u64) -> Result<Self> {
        Self::new(dim, entries.iter().map(|&x| BigInt::from(x)).collect(), q0, 0)
    }

    pub fn identity(dim: usize, q0: u64) -> Self {
        let mut numerators = vec![BigInt::zero(); dim * dim];
        for i in 0..dim {
            numerators[i * dim + i] = BigInt::one();
        }
        RationalMatrix { dim, numerators, q0, exponent: 0 }
    }

    fn normalize(&mut self) {
        if self.q0 == 1 {
            self.exponent = 0;
            return;
        }
        let q0 = BigInt::from(self.q0);
        while self.exponent > 0 && self.numerators.iter().all(|x| (x % &q0).is_zero()) {
            for x in &mut self.numerators {
                *x /= &q0;
            }
            self.exponent -= 1;
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn q0(&self) -> u64 {
        self.q0
    }

    /// The exponent `e` of the denominator `q0^e`.
    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn numerators(&self) -> &[BigInt] {
        &self.numerators
    }

    pub fn denominator(&self) -> BigUint {
        BigUint::from(self.q0).pow(self.exponent)
    }

    pub fn mul(&self, other: &RationalMatrix) -> RationalMatrix {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        assert_eq!(self.q0, other.q0, "q0 mismatch");
        let n = self.dim;
        let mut out = vec![BigInt::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = &self.numerators[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * &other.numerators[k * n + j];
                }
            }
        }
        let mut m = RationalMatrix {
            dim: n,
            numerators: out,
            q0: self.q0,
            exponent: self.exponent + other.exponent,
        };
        m.normalize();
        m
    }

    /// Exact inverse in `GL_n(Z[1/q0])`.
    pub fn inverse(&self) -> Result<RationalMatrix> {
        let n = self.dim;
        let det = det_bareiss(n, &self.numerators);
        if det.is_zero() {
            return Err(ModError::NotInvertible);
        }
        // det must be ± a product of primes dividing q0.
        let q0_primes = factor_u64(self.q0);
        let mut rest = det.abs();
        let mut f = 0u32;
        for &(r, er) in &q0_primes {
            let v = valuation(&rest, r).expect("nonzero");
            rest /= BigInt::from(r).pow(v);
            f = f.max(v.div_ceil(er));
        }
        if !rest.is_one() {
            return Err(ModError::NotInvertible);
        }
        let scale = BigInt::from(self.q0).pow(f) / &det;
        let lift = BigInt::from(self.q0).pow(self.exponent) * scale;
        let numerators = adjugate(n, &self.numerators)
            .into_iter()
            .map(|x| x * &lift)
            .collect();
        RationalMatrix::new(n, numerators, self.q0, f)
    }

    pub fn is_identity(&self) -> bool {
        *self == RationalMatrix::identity(self.dim, self.q0)
    }

    /// Reduction modulo `q`; see [`reduce_matrix`].
    pub fn reduce(&self, q: &Modulus) -> Result<ResidueMatrix> {
        reduce_matrix(self, q)
    }
}

/// Entry-wise `numerator * denominator^{-1} mod q`.
pub fn reduce_matrix(m: &RationalMatrix, q: &Modulus) -> Result<ResidueMatrix> {
    let qw = q.word()?;
    let qb = BigInt::from(qw);
    let den = BigInt::from(m.denominator());
    let inv = if m.exponent == 0 {
        BigInt::one()
    } else {
        inv_mod(&den, &qb).ok_or(ModError::NotCoprimeToQ0)?
    };
    let entries = m
        .numerators
        .iter()
        .map(|x| (x * &inv).mod_floor(&qb).to_u64().expect("reduced below q"))
        .collect();
    Ok(ResidueMatrix { dim: m.dim, entries, modulus: q.clone(), q: qw })
}

/// A square matrix over `Z/qZ` with entries canonically reduced to `[0, q)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ResidueMatrix {
    dim: usize,
    entries: Vec<u64>,
    modulus: Modulus,
    q: u64,
}

impl ResidueMatrix {
    pub fn new(dim: usize, entries: Vec<u64>, modulus: &Modulus) -> Result<Self> {
        let q = modulus.word()?;
        if entries.len() != dim * dim {
            return Err(ModError::Shape { expected: dim * dim, found: entries.len() });
        }
        if let Some(&bad) = entries.iter().find(|&&x| x >= q) {
            return Err(ModError::OutOfRange(bad, q));
        }
        Ok(ResidueMatrix { dim, entries, modulus: modulus.clone(), q })
    }

    /// Reduces signed integer entries into `[0, q)`.
    pub fn from_i64(dim: usize, entries: &[i64], modulus: &Modulus) -> Result<Self> {
        let q = modulus.word()?;
        let reduced = entries
            .iter()
            .map(|&x| (x as i128).rem_euclid(q as i128) as u64)
            .collect();
        Self::new(dim, reduced, modulus)
    }

    pub fn identity(dim: usize, modulus: &Modulus) -> Result<Self> {
        let q = modulus.word()?;
        let mut entries = vec![0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1 % q;
        }
        Ok(ResidueMatrix { dim, entries, modulus: modulus.clone(), q })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    /// The modulus as a machine word.
    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn mul(&self, other: &ResidueMatrix) -> ResidueMatrix {
        assert_eq!(self.q, other.q, "modulus mismatch");
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let mut entries = vec![0; self.dim * self.dim];
        mul_into(self.dim, self.q, &self.entries, &other.entries, &mut entries);
        ResidueMatrix { dim: self.dim, entries, modulus: self.modulus.clone(), q: self.q }
    }

    pub fn pow(&self, mut exp: u64) -> ResidueMatrix {
        let mut acc = ResidueMatrix::identity(self.dim, &self.modulus).expect("word modulus");
        let mut base = self.clone();
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            exp >>= 1;
        }
        acc
    }

    pub fn is_identity(&self) -> bool {
        is_identity_mod(self.dim, &self.entries, self.q)
    }

    /// Reduction to a modulus dividing the current one.
    pub fn reduce_to(&self, target: &Modulus) -> Result<ResidueMatrix> {
        let t = target.word()?;
        if !self.q.is_multiple_of(t) {
            return Err(ModError::NotDivisor(target.value().clone(), self.modulus.value().clone()));
        }
        let entries = self.entries.iter().map(|&x| x % t).collect();
        Ok(ResidueMatrix { dim: self.dim, entries, modulus: target.clone(), q: t })
    }

    /// Inverse modulo `q`, computed on each prime-power component and
    /// recombined by CRT. `None` when the matrix is not invertible.
    pub fn inverse(&self) -> Option<ResidueMatrix> {
        let entries = inverse_words(self.dim, &self.entries, &self.modulus)?;
        Some(ResidueMatrix { dim: self.dim, entries, modulus: self.modulus.clone(), q: self.q })
    }
}

impl fmt::Display for ResidueMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for r in 0..self.dim {
            if r > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[")?;
            for c in 0..self.dim {
                if c > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", self.entries[r * self.dim + c])?;
            }
            write!(f, "]")?;
        }
        write!(f, "] mod {}", self.q)
    }
}

pub(crate) fn mul_into(n: usize, q: u64, a: &[u64], b: &[u64], out: &mut [u64]) {
    // Accumulate in u128; n is small so n * q^2 never overflows.
    for i in 0..n {
        for j in 0..n {
            let mut acc: u128 = 0;
            for k in 0..n {
                acc += a[i * n + k] as u128 * b[k * n + j] as u128;
            }
            out[i * n + j] = (acc % q as u128) as u64;
        }
    }
}

pub(crate) fn is_identity_mod(n: usize, entries: &[u64], m: u64) -> bool {
    entries.iter().enumerate().all(|(idx, &x)| {
        let want = if idx / n == idx % n { 1 % m } else { 0 };
        x % m == want
    })
}

fn inverse_prime_power(n: usize, entries: &[u64], p: u64, m: u64) -> Option<Vec<u64>> {
    let w = 2 * n;
    let mut a = vec![0u64; n * w];
    for r in 0..n {
        for c in 0..n {
            a[r * w + c] = entries[r * n + c] % m;
        }
        a[r * w + n + r] = 1 % m;
    }
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r * w + col].is_multiple_of(p))?;
        if pivot != col {
            for c in 0..w {
                a.swap(pivot * w + c, col * w + c);
            }
        }
        let inv = inv_mod_u64(a[col * w + col], m)?;
        for c in 0..w {
            a[col * w + c] = mul_mod(a[col * w + c], inv, m);
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[r * w + col];
            if factor == 0 {
                continue;
            }
            for c in 0..w {
                let sub = mul_mod(factor, a[col * w + c], m);
                a[r * w + c] = (a[r * w + c] + m - sub) % m;
            }
        }
    }
    Some((0..n * n).map(|i| a[(i / n) * w + n + i % n]).collect())
}

pub(crate) fn inverse_words(n: usize, entries: &[u64], modulus: &Modulus) -> Option<Vec<u64>> {
    if modulus.is_one() {
        return Some(vec![0; n * n]);
    }
    let comps: Vec<(u64, u64)> = modulus
        .factors()
        .iter()
        .map(|&(p, e)| (p, p.pow(e)))
        .collect();
    let parts: Vec<Vec<u64>> = comps
        .iter()
        .map(|&(p, m)| inverse_prime_power(n, entries, p, m))
        .collect::<Option<_>>()?;
    let moduli: Vec<u64> = comps.iter().map(|&(_, m)| m).collect();
    Some(
        (0..n * n)
            .map(|i| {
                let residues: Vec<u64> = parts.iter().map(|part| part[i]).collect();
                crt_combine_words(&residues, &moduli)
            })
            .collect(),
    )
}

/// Reduces a signed integer into `[0, m)` for arbitrary precision values.
pub fn reduce_bigint(x: &BigInt, m: &BigUint) -> BigUint {
    let m = BigInt::from_biguint(Sign::Plus, m.clone());
    x.mod_floor(&m).to_biguint().expect("nonnegative")
}

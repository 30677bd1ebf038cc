//! Truncated p-adic polynomial maps: divided differences, Jacobians, the
//! max-minor norm, Hensel lifting, curve reduction and sumset coverage.
//!
//! Scalars are integers modulo `p^M`. Division by `p^v` lowers the tracked
//! precision by `v`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modring::{self, inv_mod, is_prime, valuation};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PadicError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("insufficient truncation")]
    InsufficientTruncation,
    #[error("expected {expected} {what}, found {found}")]
    Shape { what: &'static str, expected: usize, found: usize },
    #[error("matrix has more rows ({d}) than columns ({m})")]
    TooManyRows { d: usize, m: usize },
    #[error("N(dF(x0)) = |p^{found}| is below |p^{k0}|")]
    DegenerateDifferential { found: String, k0: u32 },
    #[error("l = {l} must be at least k0 + 1 = {}", k0 + 1)]
    LengthTooSmall { l: u32, k0: u32 },
    #[error("working precision {m} must exceed l + k0 + margin = {need}")]
    PrecisionTooSmall { m: u32, need: u32 },
    #[error("non-increasing residual valuation at step {step}: predicted {predicted}, observed {observed}")]
    NonIncreasingResidual { step: usize, predicted: u32, observed: u32 },
    #[error("curve exponent s must be at least 2")]
    CurveExponent,
    #[error("constant in span")]
    ConstantInSpan,
    #[error("component functions are linearly dependent")]
    DependentComponents,
    #[error("enumeration guard exceeded: {0}")]
    Guard(String),
    #[error("invalid map document: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, PadicError>;

fn pow_p(p: u64, e: u32) -> BigInt {
    num_traits::pow(BigInt::from(p), e as usize)
}

/// A scalar known modulo `p^prec`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Truncated {
    pub value: BigInt,
    pub prec: u32,
}

impl Truncated {
    pub fn new(value: &BigInt, p: u64, prec: u32) -> Self {
        Truncated { value: value.mod_floor(&pow_p(p, prec)), prec }
    }

    fn sub(&self, other: &Truncated, p: u64) -> Truncated {
        let prec = self.prec.min(other.prec);
        Truncated::new(&(&self.value - &other.value), p, prec)
    }

    /// `self / d` where `d` is known modulo `p^d_prec`. Loses `v_p(d)` digits.
    fn div(&self, d: &Truncated, p: u64) -> Result<Truncated> {
        let prec = self.prec.min(d.prec);
        let dm = d.value.mod_floor(&pow_p(p, prec));
        if dm.is_zero() {
            return Err(PadicError::InsufficientTruncation);
        }
        let v = valuation(&dm, p).expect("nonzero");
        if v >= prec {
            return Err(PadicError::InsufficientTruncation);
        }
        let out_prec = prec - v;
        let modulus = pow_p(p, out_prec);
        let pv = pow_p(p, v);
        let unit = (&dm / &pv).mod_floor(&modulus);
        let num = self.value.mod_floor(&pow_p(p, prec));
        // The quotient is exact for polynomial data, so p^v divides num.
        let (q, r) = num.div_rem(&pv);
        if !r.is_zero() {
            return Err(PadicError::InsufficientTruncation);
        }
        let inv = inv_mod(&unit, &modulus).expect("unit");
        Ok(Truncated::new(&(q * inv), p, out_prec))
    }
}

/// One monomial `x^exps` with its coefficient column.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermDocument {
    pub exps: Vec<u32>,
    pub coeffs: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapDocument {
    pub p: u64,
    pub n0: usize,
    pub d0: usize,
    pub terms: Vec<TermDocument>,
}

/// A polynomial map `Z_p^{n0} → Z_p^{d0}` with integer coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnalyticMap {
    p: u64,
    n0: usize,
    d0: usize,
    terms: BTreeMap<Vec<u32>, Vec<BigInt>>,
}

impl AnalyticMap {
    /// Repeated monomials are summed and vanishing ones dropped.
    pub fn new(p: u64, n0: usize, d0: usize, terms: Vec<(Vec<u32>, Vec<BigInt>)>) -> Result<Self> {
        if !is_prime(p) {
            return Err(PadicError::NotPrime(p));
        }
        let mut map: BTreeMap<Vec<u32>, Vec<BigInt>> = BTreeMap::new();
        for (exps, coeffs) in terms {
            if exps.len() != n0 {
                return Err(PadicError::Shape { what: "exponents", expected: n0, found: exps.len() });
            }
            if coeffs.len() != d0 {
                return Err(PadicError::Shape { what: "coefficients", expected: d0, found: coeffs.len() });
            }
            let entry = map.entry(exps).or_insert_with(|| vec![BigInt::zero(); d0]);
            for (e, c) in entry.iter_mut().zip(coeffs) {
                *e += c;
            }
        }
        map.retain(|_, c| c.iter().any(|x| !x.is_zero()));
        Ok(AnalyticMap { p, n0, d0, terms: map })
    }

    pub fn from_document(doc: &MapDocument) -> Result<Self> {
        let terms = doc
            .terms
            .iter()
            .map(|t| (t.exps.clone(), t.coeffs.iter().map(|&c| BigInt::from(c)).collect()))
            .collect();
        Self::new(doc.p, doc.n0, doc.d0, terms)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MapDocument = serde_json::from_str(text).map_err(|e| PadicError::Format(e.to_string()))?;
        Self::from_document(&doc)
    }

    pub fn to_document(&self) -> MapDocument {
        MapDocument {
            p: self.p,
            n0: self.n0,
            d0: self.d0,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| TermDocument {
                    exps: e.clone(),
                    coeffs: c.iter().map(|x| x.to_i64().expect("coefficient fits i64")).collect(),
                })
                .collect(),
        }
    }

    /// `(x, x^2, ..., x^d)` in one variable.
    pub fn moment_curve(p: u64, d: usize) -> Result<Self> {
        let terms = (1..=d)
            .map(|i| {
                let mut c = vec![BigInt::zero(); d];
                c[i - 1] = BigInt::one();
                (vec![i as u32], c)
            })
            .collect();
        Self::new(p, 1, d, terms)
    }

    /// A one-variable map from coefficient lists by degree, one per component.
    pub fn univariate(p: u64, components: &[Vec<i64>]) -> Result<Self> {
        let d0 = components.len();
        let mut terms = Vec::new();
        for (j, comp) in components.iter().enumerate() {
            for (deg, &c) in comp.iter().enumerate() {
                let mut col = vec![BigInt::zero(); d0];
                col[j] = BigInt::from(c);
                terms.push((vec![deg as u32], col));
            }
        }
        Self::new(p, 1, d0, terms)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn d0(&self) -> usize {
        self.d0
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Vec<BigInt>)> {
        self.terms.iter()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum::<u32>()).max().unwrap_or(0)
    }

    /// Coefficients by degree of component `j` of a one-variable map.
    pub fn univariate_component(&self, j: usize) -> Vec<BigInt> {
        assert_eq!(self.n0, 1, "not a one-variable map");
        let deg = self.degree() as usize;
        let mut out = vec![BigInt::zero(); deg + 1];
        for (e, c) in &self.terms {
            out[e[0] as usize] += &c[j];
        }
        out
    }

    /// Exact value at an integer point.
    pub fn eval_exact(&self, x: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(x.len(), self.n0, "point has the wrong dimension");
        let mut out = vec![BigInt::zero(); self.d0];
        for (exps, coeffs) in &self.terms {
            let mono: BigInt = exps.iter().zip(x).map(|(&e, xi)| num_traits::pow(xi.clone(), e as usize)).product();
            for (o, c) in out.iter_mut().zip(coeffs) {
                *o += c * &mono;
            }
        }
        out
    }

    /// Value modulo `p^prec`, each coordinate in `[0, p^prec)`.
    pub fn eval_mod(&self, x: &[BigInt], prec: u32) -> Vec<BigInt> {
        let m = pow_p(self.p, prec);
        self.eval_exact(x).into_iter().map(|v| v.mod_floor(&m)).collect()
    }

    /// `∂F/∂x_j`.
    pub fn partial(&self, j: usize) -> AnalyticMap {
        let mut terms = Vec::new();
        for (exps, coeffs) in &self.terms {
            if exps[j] == 0 {
                continue;
            }
            let mut e = exps.clone();
            let factor = BigInt::from(e[j]);
            e[j] -= 1;
            terms.push((e, coeffs.iter().map(|c| c * &factor).collect()));
        }
        AnalyticMap::new(self.p, self.n0, self.d0, terms).expect("derivative keeps the shape")
    }

    /// Coefficient rows: one row per component, one column per monomial
    /// (monomials in key order, the constant monomial included when present).
    fn coefficient_rows(&self) -> (Vec<Vec<u32>>, Vec<Vec<BigInt>>) {
        let monos: Vec<Vec<u32>> = self.terms.keys().cloned().collect();
        let rows = (0..self.d0)
            .map(|j| self.terms.values().map(|c| c[j].clone()).collect())
            .collect();
        (monos, rows)
    }
}

/// A point of `(Z/p^M)^n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedPoint {
    pub p: u64,
    pub prec: u32,
    pub coords: Vec<BigInt>,
}

impl TruncatedPoint {
    pub fn new(p: u64, prec: u32, coords: Vec<BigInt>) -> Result<Self> {
        if prec == 0 {
            return Err(PadicError::InsufficientTruncation);
        }
        let m = pow_p(p, prec);
        Ok(TruncatedPoint { p, prec, coords: coords.into_iter().map(|c| c.mod_floor(&m)).collect() })
    }

    pub fn from_i64(p: u64, prec: u32, coords: &[i64]) -> Result<Self> {
        Self::new(p, prec, coords.iter().map(|&c| BigInt::from(c)).collect())
    }
}

fn eval_univariate(coeffs: &[BigInt], x: &BigInt) -> BigInt {
    coeffs.iter().rev().fold(BigInt::zero(), |acc, c| acc * x + c)
}

/// Complete homogeneous symmetric polynomial `h_r(xs)`.
fn complete_homogeneous(r: usize, xs: &[BigInt]) -> BigInt {
    // h_r(x_1..x_n) = h_r(x_1..x_{n-1}) + x_n h_{r-1}(x_1..x_n)
    let mut h = vec![BigInt::zero(); r + 1];
    h[0] = BigInt::one();
    for x in xs {
        for deg in 1..=r {
            let add = x * &h[deg - 1];
            h[deg] += add;
        }
    }
    h[r].clone()
}

/// `Φ̄^k f(x_1, ..., x_{k+1}) = Σ_n c_n h_{n-k}(x_1, ..., x_{k+1})`, valid for
/// all points including coincident ones.
pub fn divided_difference_closed_form(coeffs: &[BigInt], points: &[BigInt]) -> BigInt {
    let k = points.len() - 1;
    coeffs
        .iter()
        .enumerate()
        .skip(k)
        .map(|(n, c)| c * complete_homogeneous(n - k, points))
        .sum()
}

fn divided_difference_rec(coeffs: &[BigInt], points: &[Truncated], p: u64) -> Result<Truncated> {
    if points.len() == 1 {
        let v = eval_univariate(coeffs, &points[0].value);
        return Ok(Truncated::new(&v, p, points[0].prec));
    }
    // (Φ^{k-1} f(x_1, x_3, ..., x_{k+1}) − Φ^{k-1} f(x_2, ..., x_{k+1})) / (x_1 − x_2)
    let mut first: Vec<Truncated> = vec![points[0].clone()];
    first.extend_from_slice(&points[2..]);
    let a = divided_difference_rec(coeffs, &first, p)?;
    let b = divided_difference_rec(coeffs, &points[1..], p)?;
    a.sub(&b, p).div(&points[0].sub(&points[1], p), p)
}

/// Order-`k` divided difference of a one-variable polynomial at `k+1` points
/// modulo `p^prec`, `k = points.len() - 1`. Pairwise distinct points use the
/// defining recursion with precision loss; otherwise the continuous extension
/// is evaluated in closed form.
pub fn divided_difference(coeffs: &[BigInt], points: &[BigInt], p: u64, prec: u32) -> Result<Truncated> {
    assert!(!points.is_empty(), "need at least one point");
    let m = pow_p(p, prec);
    let reduced: Vec<BigInt> = points.iter().map(|x| x.mod_floor(&m)).collect();
    let distinct = (0..reduced.len()).all(|i| (i + 1..reduced.len()).all(|j| reduced[i] != reduced[j]));
    if distinct {
        let pts: Vec<Truncated> = reduced.iter().map(|x| Truncated { value: x.clone(), prec }).collect();
        let r = divided_difference_rec(coeffs, &pts, p)?;
        if r.prec == 0 {
            return Err(PadicError::InsufficientTruncation);
        }
        Ok(r)
    } else {
        Ok(Truncated::new(&divided_difference_closed_form(coeffs, &reduced), p, prec))
    }
}

/// `dF(x)` modulo `p^M`, as `d0` rows of `n0` entries.
pub fn jacobian(f: &AnalyticMap, x: &TruncatedPoint) -> Vec<Vec<BigInt>> {
    let cols: Vec<Vec<BigInt>> = (0..f.n0).map(|j| f.partial(j).eval_mod(&x.coords, x.prec)).collect();
    (0..f.d0).map(|i| cols.iter().map(|c| c[i].clone()).collect()).collect()
}

/// `N(X) = |p^k|`, or a vanishing norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinorNorm {
    Valuation(u32),
    /// Every maximal minor vanishes modulo `p^M`, but not all exactly.
    AtLeast(u32),
    /// Every maximal minor is exactly zero.
    Zero,
}

impl MinorNorm {
    pub fn valuation(&self) -> Option<u32> {
        match self {
            MinorNorm::Valuation(k) => Some(*k),
            _ => None,
        }
    }
}

impl std::fmt::Display for MinorNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MinorNorm::Valuation(k) => write!(f, "{k}"),
            MinorNorm::AtLeast(m) => write!(f, ">= {m}"),
            MinorNorm::Zero => write!(f, "zero"),
        }
    }
}

/// k-element subsets of `0..m` in lexicographic order.
pub fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > m {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] != i + m - k) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

fn minor(x: &[Vec<BigInt>], cols: &[usize]) -> BigInt {
    let d = x.len();
    let entries: Vec<BigInt> = x.iter().flat_map(|row| cols.iter().map(|&c| row[c].clone())).collect();
    modring::det_bareiss(d, &entries)
}

/// Minimal valuation over maximal minors and the columns achieving it (first
/// in lexicographic order). With `prec`, minors are read modulo `p^prec`.
pub fn best_minor(x: &[Vec<BigInt>], p: u64, prec: Option<u32>) -> Result<(MinorNorm, Vec<usize>)> {
    let d = x.len();
    let m = x.first().map_or(0, |r| r.len());
    if d > m {
        return Err(PadicError::TooManyRows { d, m });
    }
    let modulus = prec.map(|e| pow_p(p, e));
    let mut best: Option<(u32, Vec<usize>)> = None;
    let mut any_nonzero = false;
    for cols in combinations(m, d) {
        let det = minor(x, &cols);
        if det.is_zero() {
            continue;
        }
        any_nonzero = true;
        let reduced = match &modulus {
            Some(md) => det.mod_floor(md),
            None => det,
        };
        if reduced.is_zero() {
            continue;
        }
        let v = valuation(&reduced, p).expect("nonzero");
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, cols));
        }
    }
    Ok(match best {
        Some((v, cols)) => (MinorNorm::Valuation(v), cols),
        None if any_nonzero => (MinorNorm::AtLeast(prec.expect("reduction only happens with prec")), Vec::new()),
        None => (MinorNorm::Zero, Vec::new()),
    })
}

/// `N(X)` for a `d × m` matrix given by rows.
pub fn max_minor_norm(x: &[Vec<BigInt>], p: u64, prec: Option<u32>) -> Result<MinorNorm> {
    best_minor(x, p, prec).map(|(n, _)| n)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    /// `l_i` from `l_1 = 2l`, `l_{i+1} = 2(l_i − k0)`.
    pub predicted: u32,
    /// `v_p` of the residual modulo `p^M`; `None` once it vanishes.
    pub observed: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HenselResult {
    pub x: TruncatedPoint,
    pub trace: Vec<TraceStep>,
}

pub const DEFAULT_MARGIN: u32 = 4;

/// Finds `x ≡ x0 mod p^l` with `F(x) ≡ F(x0) + p^{l+k0} y (mod p^M)`, `M = x0.prec`.
pub fn hensel_solve(
    f: &AnalyticMap,
    x0: &TruncatedPoint,
    y: &[BigInt],
    l: u32,
    k0: u32,
    margin: u32,
) -> Result<HenselResult> {
    let p = f.p;
    let big_m = x0.prec;
    if y.len() != f.d0 {
        return Err(PadicError::Shape { what: "target coordinates", expected: f.d0, found: y.len() });
    }
    if l < k0 + 1 {
        return Err(PadicError::LengthTooSmall { l, k0 });
    }
    if big_m <= l + k0 + margin {
        return Err(PadicError::PrecisionTooSmall { m: big_m, need: l + k0 + margin });
    }
    let norm = max_minor_norm(&jacobian(f, x0), p, Some(big_m))?;
    match norm.valuation() {
        Some(v) if v <= k0 => {}
        _ => return Err(PadicError::DegenerateDifferential { found: norm.to_string(), k0 }),
    }
    let modulus = pow_p(p, big_m);
    let base = f.eval_mod(&x0.coords, big_m);
    let target: Vec<BigInt> = base
        .iter()
        .zip(y)
        .map(|(b, yi)| (b + pow_p(p, l + k0) * yi).mod_floor(&modulus))
        .collect();

    // One linear step: returns u with dF(x) u ≡ p^{k0} rhs, u supported on the
    // best minor.
    let solve = |x: &TruncatedPoint, rhs: &[BigInt]| -> Vec<BigInt> {
        let jac = jacobian(f, x);
        let (_, cols) = best_minor(&jac, p, Some(big_m)).expect("shape checked");
        let d = f.d0;
        let sub: Vec<BigInt> = jac.iter().flat_map(|row| cols.iter().map(|&c| row[c].clone())).collect();
        let det = modring::det_bareiss(d, &sub).mod_floor(&modulus);
        let kappa = valuation(&det, p).expect("minor nonzero mod p^M");
        let unit = &det / pow_p(p, kappa);
        let scale = pow_p(p, k0 - kappa) * inv_mod(&unit, &modulus).expect("unit");
        let adj = modring::adjugate(d, &sub);
        let mut u = vec![BigInt::zero(); f.n0];
        for (r, &c) in cols.iter().enumerate() {
            let s: BigInt = (0..d).map(|j| &adj[r * d + j] * &rhs[j]).sum();
            u[c] = (s * &scale).mod_floor(&modulus);
        }
        u
    };

    let residual = |x: &TruncatedPoint| -> Vec<BigInt> {
        f.eval_mod(&x.coords, big_m)
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b).mod_floor(&modulus))
            .collect()
    };
    let min_valuation = |r: &[BigInt]| -> Option<u32> {
        r.iter().filter(|v| !v.is_zero()).map(|v| valuation(v, p).expect("nonzero")).min()
    };

    // x_1 = x0 + p^l u with dF(x0) u = p^{k0} y.
    let u = solve(x0, y);
    let step = pow_p(p, l);
    let mut x = TruncatedPoint::new(
        p,
        big_m,
        x0.coords.iter().zip(&u).map(|(a, b)| a + &step * b).collect(),
    )?;
    let mut predicted = 2 * l;
    let mut trace = Vec::new();
    loop {
        let r = residual(&x);
        let observed = min_valuation(&r);
        trace.push(TraceStep { predicted, observed });
        let Some(obs) = observed else { break };
        if obs < predicted.min(big_m) {
            return Err(PadicError::NonIncreasingResidual { step: trace.len(), predicted, observed: obs });
        }
        let next = 2 * (predicted - k0);
        if next <= predicted {
            return Err(PadicError::NonIncreasingResidual { step: trace.len(), predicted: next, observed: obs });
        }
        // y' = −r / p^{l_i}, step p^{l_i − k0}.
        let scale = pow_p(p, predicted);
        let rhs: Vec<BigInt> = r.iter().map(|v| -(v / &scale)).collect();
        let u = solve(&x, &rhs);
        let step = pow_p(p, predicted - k0);
        x = TruncatedPoint::new(p, big_m, x.coords.iter().zip(&u).map(|(a, b)| a + &step * b).collect())?;
        predicted = next;
        if trace.len() > 64 {
            return Err(PadicError::InsufficientTruncation);
        }
    }
    Ok(HenselResult { x, trace })
}

/// `F ∘ r` with `r(t) = x0 + p (t, t^s, t^{s^2}, ..., t^{s^{n0-1}})`.
pub fn curve_reduce(f: &AnalyticMap, x0: &[BigInt], s: u32) -> Result<AnalyticMap> {
    if s < 2 {
        return Err(PadicError::CurveExponent);
    }
    if x0.len() != f.n0 {
        return Err(PadicError::Shape { what: "base point coordinates", expected: f.n0, found: x0.len() });
    }
    let p = BigInt::from(f.p);
    // Coordinate k as a polynomial in t: x0_k + p t^{s^k}.
    let coord_poly = |k: usize| -> BTreeMap<u64, BigInt> {
        let mut m = BTreeMap::new();
        if !x0[k].is_zero() {
            m.insert(0, x0[k].clone());
        }
        m.insert((s as u64).pow(k as u32), p.clone());
        m
    };
    let mul = |a: &BTreeMap<u64, BigInt>, b: &BTreeMap<u64, BigInt>| -> BTreeMap<u64, BigInt> {
        let mut out: BTreeMap<u64, BigInt> = BTreeMap::new();
        for (da, ca) in a {
            for (db, cb) in b {
                *out.entry(da + db).or_insert_with(BigInt::zero) += ca * cb;
            }
        }
        out.retain(|_, c| !c.is_zero());
        out
    };
    let polys: Vec<BTreeMap<u64, BigInt>> = (0..f.n0).map(coord_poly).collect();
    let mut acc: BTreeMap<u64, Vec<BigInt>> = BTreeMap::new();
    for (exps, coeffs) in &f.terms {
        let mut mono: BTreeMap<u64, BigInt> = BTreeMap::from([(0, BigInt::one())]);
        for (k, &e) in exps.iter().enumerate() {
            for _ in 0..e {
                mono = mul(&mono, &polys[k]);
            }
        }
        for (deg, c) in mono {
            let entry = acc.entry(deg).or_insert_with(|| vec![BigInt::zero(); f.d0]);
            for (e, fc) in entry.iter_mut().zip(coeffs) {
                *e += &c * fc;
            }
        }
    }
    let terms = acc.into_iter().map(|(deg, c)| (vec![deg as u32], c)).collect();
    AnalyticMap::new(f.p, 1, f.d0, terms)
}

fn rank_rational(rows: &[Vec<BigRational>]) -> usize {
    let mut m: Vec<Vec<BigRational>> = rows.to_vec();
    let cols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..m.len()).find(|&r| !m[r][c].is_zero()) else { continue };
        m.swap(rank, piv);
        for r in 0..m.len() {
            if r != rank && !m[r][c].is_zero() {
                let factor = &m[r][c] / &m[rank][c];
                for cc in c..cols {
                    let sub = &factor * &m[rank][cc];
                    m[r][cc] -= sub;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Checks that `1, f_1, ..., f_d` are linearly independent.
pub fn check_independence(f: &AnalyticMap) -> Result<()> {
    let (monos, rows) = f.coefficient_rows();
    let to_q = |rows: &[Vec<BigInt>]| -> Vec<Vec<BigRational>> {
        rows.iter().map(|r| r.iter().map(|x| BigRational::from_integer(x.clone())).collect()).collect()
    };
    let mut cols_monos = monos.clone();
    let zero = vec![0u32; f.n0];
    let mut rows = rows;
    if !monos.contains(&zero) {
        cols_monos.push(zero.clone());
        for r in &mut rows {
            r.push(BigInt::zero());
        }
    }
    let const_col = cols_monos.iter().position(|m| *m == zero).expect("present");
    let base = to_q(&rows);
    let r = rank_rational(&base);
    if r < f.d0 {
        return Err(PadicError::DependentComponents);
    }
    let mut with_one = base;
    let mut one = vec![BigRational::zero(); cols_monos.len()];
    one[const_col] = BigRational::one();
    with_one.push(one);
    if rank_rational(&with_one) == r {
        return Err(PadicError::ConstantInSpan);
    }
    Ok(())
}

/// A basis of `W ∩ Z_(p)^d` for `W` the span of the coefficient columns:
/// the first `r` columns of `U` in a Smith decomposition `C = U D V` over
/// `Z_(p)`. Returned as integer vectors modulo `p^prec`.
pub fn saturated_span_basis(f: &AnalyticMap, prec: u32) -> Vec<Vec<BigInt>> {
    let p = f.p;
    let d = f.d0;
    let (_, rows) = f.coefficient_rows();
    let n = rows.first().map_or(0, |r| r.len());
    let mut a: Vec<Vec<BigRational>> =
        rows.iter().map(|r| r.iter().map(|x| BigRational::from_integer(x.clone())).collect()).collect();
    // u accumulates U; row operations on `a` are mirrored as inverse column
    // operations on `u`, keeping C = U · a · V.
    let mut u: Vec<Vec<BigRational>> =
        (0..d).map(|i| (0..d).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }).collect()).collect();
    let vp = |x: &BigRational| -> Option<i64> {
        if x.is_zero() {
            None
        } else {
            Some(valuation(x.numer(), p).expect("nonzero") as i64 - valuation(x.denom(), p).expect("nonzero") as i64)
        }
    };
    let mut rank = 0;
    let mut col_done = vec![false; n];
    while rank < d {
        // Pivot of minimal valuation in the remaining block.
        let mut best: Option<(i64, usize, usize)> = None;
        for r in rank..d {
            for c in 0..n {
                if col_done[c] {
                    continue;
                }
                if let Some(v) = vp(&a[r][c]) {
                    if best.is_none_or(|(bv, _, _)| v < bv) {
                        best = Some((v, r, c));
                    }
                }
            }
        }
        let Some((_, pr, pc)) = best else { break };
        a.swap(rank, pr);
        for row in &mut u {
            row.swap(rank, pr);
        }
        // Clear the rest of the pivot column with row ops; the multipliers lie
        // in Z_(p) because the pivot has minimal valuation.
        for r in 0..d {
            if r == rank || a[r][pc].is_zero() {
                continue;
            }
            let factor = &a[r][pc] / &a[rank][pc];
            for c in 0..n {
                let sub = &factor * &a[rank][c];
                a[r][c] -= sub;
            }
            // row_r -= factor row_rank  ⇒  col_rank(U) += factor col_r(U)
            for row in &mut u {
                let add = &factor * &row[r];
                row[rank] += add;
            }
        }
        col_done[pc] = true;
        rank += 1;
    }
    let modulus = pow_p(p, prec);
    (0..rank)
        .map(|j| {
            (0..d)
                .map(|i| {
                    let x = &u[i][j];
                    let inv = inv_mod(x.denom(), &modulus).expect("denominator prime to p");
                    (x.numer() * inv).mod_floor(&modulus)
                })
                .collect()
        })
        .collect()
}

/// Enumeration guards for [`sumset_coverage`].
pub const MAX_TRUNCATION: u64 = 2187;
pub const MAX_SUMMANDS: usize = 3;
const MAX_TARGET_CELLS: u64 = 1 << 26;

struct Grid {
    q: u64,
    d: usize,
}

impl Grid {
    fn encode(&self, v: &[u64]) -> usize {
        v.iter().rev().fold(0u64, |acc, &x| acc * self.q + x) as usize
    }

    fn decode(&self, mut i: usize, out: &mut [u64]) {
        for o in out.iter_mut() {
            *o = (i as u64) % self.q;
            i /= self.q as usize;
        }
    }

    fn cells(&self) -> usize {
        (self.q as usize).pow(self.d as u32)
    }

    fn combine(&self, a: &[u64], b: &[u64], sign: i8, out: &mut [u64]) {
        for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
            *o = if sign > 0 { (x + y) % self.q } else { (x + self.q - y) % self.q };
        }
    }
}

fn image_points(f: &AnalyticMap, l: u32, prec: u32) -> Result<Vec<Vec<u64>>> {
    let p = f.p;
    let count = p.pow(prec - l);
    let total = count
        .checked_pow(f.n0 as u32)
        .filter(|&t| t <= 1 << 22)
        .ok_or_else(|| PadicError::Guard(format!("{count}^{} source points", f.n0)))?;
    let pl = pow_p(p, l);
    let mut out = Vec::with_capacity(total as usize);
    let mut digits = vec![0u64; f.n0];
    for _ in 0..total {
        let x: Vec<BigInt> = digits.iter().map(|&t| &pl * BigInt::from(t)).collect();
        out.push(f.eval_mod(&x, prec).iter().map(|v| v.to_u64().expect("reduced")).collect());
        for dgt in digits.iter_mut() {
            *dgt += 1;
            if *dgt < count {
                break;
            }
            *dgt = 0;
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn check_guards(f: &AnalyticMap, l: u32, c: usize, prec: u32) -> Result<Grid> {
    if c == 0 || c > MAX_SUMMANDS {
        return Err(PadicError::Guard(format!("C = {c} outside 1..={MAX_SUMMANDS}")));
    }
    let q = f.p.checked_pow(prec).filter(|&q| q <= MAX_TRUNCATION);
    let Some(q) = q else {
        return Err(PadicError::Guard(format!("p^M = {}^{prec} exceeds {MAX_TRUNCATION}", f.p)));
    };
    if l >= prec {
        return Err(PadicError::Guard(format!("l = {l} must be below M = {prec}")));
    }
    if q.checked_pow(f.d0 as u32).is_none_or(|cells| cells > MAX_TARGET_CELLS) {
        return Err(PadicError::Guard(format!("{q}^{} target cells", f.d0)));
    }
    Ok(Grid { q, d: f.d0 })
}

/// `D = Σ_C F(U) − Σ_C F(U)` as the C-fold sum of `F(U) − F(U)`, over a
/// bitset. Returns the sorted cell indices.
pub fn sumset_by_bitset(f: &AnalyticMap, l: u32, c: usize, prec: u32) -> Result<Vec<usize>> {
    let grid = check_guards(f, l, c, prec)?;
    let img = image_points(f, l, prec)?;
    let d = grid.d;
    let mut tmp = vec![0u64; d];
    let mut diff = vec![false; grid.cells()];
    for a in &img {
        for b in &img {
            grid.combine(a, b, -1, &mut tmp);
            diff[grid.encode(&tmp)] = true;
        }
    }
    let diffs: Vec<Vec<u64>> = (0..grid.cells())
        .filter(|&i| diff[i])
        .map(|i| {
            let mut v = vec![0u64; d];
            grid.decode(i, &mut v);
            v
        })
        .collect();
    let mut acc = diff.clone();
    let mut cur = vec![0u64; d];
    for _ in 1..c {
        let mut next = vec![false; grid.cells()];
        for i in (0..grid.cells()).filter(|&i| acc[i]) {
            grid.decode(i, &mut cur);
            for e in &diffs {
                grid.combine(&cur, e, 1, &mut tmp);
                next[grid.encode(&tmp)] = true;
            }
        }
        acc = next;
    }
    Ok((0..grid.cells()).filter(|&i| acc[i]).collect())
}

/// The same set through sorted sumsets: `S_C = Σ_C F(U)` kept as a sorted
/// deduplicated list, then all differences `S_C − S_C`.
pub fn sumset_by_sorted_differences(f: &AnalyticMap, l: u32, c: usize, prec: u32) -> Result<Vec<usize>> {
    let grid = check_guards(f, l, c, prec)?;
    let img = image_points(f, l, prec)?;
    let d = grid.d;
    let mut tmp = vec![0u64; d];
    let mut s: Vec<Vec<u64>> = img.clone();
    for _ in 1..c {
        let mut next = Vec::with_capacity(s.len() * img.len());
        for a in &s {
            for b in &img {
                grid.combine(a, b, 1, &mut tmp);
                next.push(tmp.clone());
            }
        }
        next.sort_unstable();
        next.dedup();
        s = next;
    }
    let mut hit = vec![false; grid.cells()];
    for a in &s {
        for b in &s {
            grid.combine(a, b, -1, &mut tmp);
            hit[grid.encode(&tmp)] = true;
        }
    }
    Ok((0..grid.cells()).filter(|&i| hit[i]).collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    /// Least `e` with `(span ∩ p^e O^d) mod p^M ⊆ D`; `None` means not covered
    /// at `M` (even `e = M − 1` fails).
    pub e: Option<u32>,
    pub image_size: usize,
    pub sumset_size: usize,
    pub span_rank: usize,
}

/// Least `e` such that every point of `(span ∩ p^e O^{d0}) mod p^M` lies in
/// `D`, for a precomputed sorted `D`.
pub fn coverage_exponent(f: &AnalyticMap, prec: u32, d_cells: &[usize]) -> Option<u32> {
    let grid = Grid { q: f.p.pow(prec), d: f.d0 };
    let mut member = vec![false; grid.cells()];
    for &i in d_cells {
        member[i] = true;
    }
    let basis: Vec<Vec<u64>> = saturated_span_basis(f, prec)
        .into_iter()
        .map(|v| v.iter().map(|x| x.to_u64().expect("reduced")).collect())
        .collect();
    let r = basis.len();
    for e in 0..prec {
        let pe = f.p.pow(e);
        let range = f.p.pow(prec - e);
        let mut coeffs = vec![0u64; r];
        let mut point = vec![0u64; grid.d];
        let total = range.pow(r as u32);
        let mut ok = true;
        for _ in 0..total {
            point.iter_mut().for_each(|x| *x = 0);
            for (a, b) in coeffs.iter().zip(&basis) {
                for (pt, &bj) in point.iter_mut().zip(b) {
                    *pt = (*pt + a * pe % grid.q * bj) % grid.q;
                }
            }
            if !member[grid.encode(&point)] {
                ok = false;
                break;
            }
            for a in coeffs.iter_mut() {
                *a += 1;
                if *a < range {
                    break;
                }
                *a = 0;
            }
        }
        if ok {
            return Some(e);
        }
    }
    None
}

/// Exhaustive open-image coverage of `Σ_C F(p^l O) − Σ_C F(p^l O)`.
pub fn sumset_coverage(f: &AnalyticMap, l: u32, c: usize, prec: u32) -> Result<Coverage> {
    check_independence(f)?;
    let d = sumset_by_bitset(f, l, c, prec)?;
    let image_size = image_points(f, l, prec)?.len();
    let span_rank = saturated_span_basis(f, prec).len();
    Ok(Coverage { e: coverage_exponent(f, prec, &d), image_size, sumset_size: d.len(), span_rank })
}

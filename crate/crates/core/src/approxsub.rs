//! Product sets, the approximate-subgroup predicate, bounded generation and
//! commutator width on finite quotients.

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::groupgen::{self, GroupError, Quotient};
use crate::modring::ResidueMatrix;
use crate::spectral;

/// Largest product count accepted by [`bounded_gen_check`].
pub const MAX_PRODUCT_COUNT: usize = 64;

/// Largest group accepted by [`commutator_fill`].
pub const MAX_COMMUTATOR_ORDER: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubsetError {
    #[error("subsets live on different quotients")]
    MismatchedQuotients,
    #[error("position {0} is not an element of the quotient")]
    BadPosition(usize),
    #[error("matrix {0} is not an element of the quotient")]
    NotAnElement(String),
    #[error("subset is not closed under inverses")]
    NotSymmetric,
    #[error("product count {0} outside 1..=64")]
    ProductCount(usize),
    #[error("group of order {0} exceeds the commutator guard")]
    TooLarge(usize),
    #[error("delta must be positive")]
    Delta,
    #[error(transparent)]
    Group(#[from] GroupError),
}

pub type Result<T> = std::result::Result<T, SubsetError>;

/// A subset of a quotient, as sorted element positions.
#[derive(Clone, Debug)]
pub struct SubsetView<'a> {
    quotient: &'a Quotient,
    positions: Vec<usize>,
    symmetric: bool,
}

impl<'a> SubsetView<'a> {
    pub fn new(quotient: &'a Quotient, positions: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = positions.iter().find(|&&p| p >= quotient.order()) {
            return Err(SubsetError::BadPosition(bad));
        }
        let mut positions = positions;
        positions.sort_unstable();
        positions.dedup();
        Ok(SubsetView { quotient, positions, symmetric: false })
    }

    /// Like [`SubsetView::new`] but also checks closure under inverses.
    pub fn new_symmetric(quotient: &'a Quotient, positions: Vec<usize>) -> Result<Self> {
        let mut view = Self::new(quotient, positions)?;
        if !view.positions.iter().all(|&p| view.contains(quotient.inverse(p))) {
            return Err(SubsetError::NotSymmetric);
        }
        view.symmetric = true;
        Ok(view)
    }

    pub fn from_matrices(quotient: &'a Quotient, mats: &[ResidueMatrix]) -> Result<Self> {
        let positions = mats
            .iter()
            .map(|m| quotient.position_of(m).ok_or_else(|| SubsetError::NotAnElement(m.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(quotient, positions)
    }

    pub fn whole(quotient: &'a Quotient) -> Self {
        SubsetView { quotient, positions: (0..quotient.order()).collect(), symmetric: true }
    }

    pub fn identity(quotient: &'a Quotient) -> Self {
        SubsetView { quotient, positions: vec![0], symmetric: true }
    }

    /// `π_Q(Ω) ∪ {I}`.
    pub fn generators_with_identity(quotient: &'a Quotient) -> Self {
        let mut positions = quotient.generator_positions();
        positions.push(0);
        positions.sort_unstable();
        positions.dedup();
        SubsetView { quotient, positions, symmetric: true }
    }

    pub fn quotient(&self) -> &'a Quotient {
        self.quotient
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn contains(&self, pos: usize) -> bool {
        self.positions.binary_search(&pos).is_ok()
    }

    pub fn is_superset_of(&self, other: &[usize]) -> bool {
        other.iter().all(|&p| self.contains(p))
    }
}

/// `{x y : x ∈ X, y ∈ Y}`.
pub fn product_set<'a>(x: &SubsetView<'a>, y: &SubsetView<'a>) -> Result<SubsetView<'a>> {
    if !std::ptr::eq(x.quotient, y.quotient) {
        return Err(SubsetError::MismatchedQuotients);
    }
    let g = x.quotient;
    let mut hit = vec![false; g.order()];
    for &a in &x.positions {
        for &b in &y.positions {
            hit[g.mul(a, b)] = true;
        }
    }
    let positions = hit.iter().enumerate().filter(|(_, &h)| h).map(|(i, _)| i).collect();
    Ok(SubsetView { quotient: g, positions, symmetric: x.symmetric && y.symmetric && x.positions == y.positions })
}

/// One conjunct of the predicate with the numbers behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conjunct {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredicateReport {
    /// `P^{(l)}(A) > Q^{-δ}`.
    pub mass: Conjunct,
    /// `l > (1/δ) ln Q`.
    pub length: Conjunct,
    /// `|AAA| ≤ |A|^{1+δ}`, decided exactly.
    pub tripling: Conjunct,
    pub overall: bool,
}

/// The three conjuncts of the approximate-subgroup predicate at level
/// `Q = |modulus|`, with the natural logarithm in the length bound.
pub fn pq_predicate(a: &SubsetView<'_>, delta: Ratio<u64>, l: usize) -> Result<PredicateReport> {
    if *delta.numer() == 0 {
        return Err(SubsetError::Delta);
    }
    let g = a.quotient;
    let q = g.modulus().value().to_f64().expect("finite modulus");
    let d = delta.to_f64().expect("finite");
    let dist = spectral::walk_distribution(g, l);
    let mass_value: f64 = a.positions.iter().map(|&p| dist[p]).sum();
    let mass = Conjunct { holds: mass_value > q.powf(-d), lhs: mass_value, rhs: q.powf(-d) };
    let length = Conjunct { holds: l as f64 > q.ln() / d, lhs: l as f64, rhs: q.ln() / d };
    let aa = product_set(a, a)?;
    let aaa = product_set(&aa, a)?;
    let (num, den) = (*delta.numer(), *delta.denom());
    // |AAA|^den ≤ |A|^(den + num)
    let lhs = num_traits::pow(BigUint::from(aaa.len()), den as usize);
    let rhs = num_traits::pow(BigUint::from(a.len()), (den + num) as usize);
    let tripling = Conjunct {
        holds: lhs <= rhs,
        lhs: aaa.len() as f64,
        rhs: (a.len() as f64).powf(1.0 + d),
    };
    let overall = mass.holds && length.holds && tripling.holds;
    Ok(PredicateReport { mass, length, tripling, overall })
}

/// `∏_c A` for `c ≥ 1`.
pub fn product_power<'a>(a: &SubsetView<'a>, c: usize) -> Result<SubsetView<'a>> {
    let mut acc = a.clone();
    for _ in 1..c {
        acc = product_set(&acc, a)?;
    }
    Ok(acc)
}

/// Whether `∏_C A` contains the congruence kernel at level `m`.
pub fn bounded_gen_check(a: &SubsetView<'_>, c: usize, m: u32) -> Result<bool> {
    if c == 0 || c > MAX_PRODUCT_COUNT {
        return Err(SubsetError::ProductCount(c));
    }
    let kernel = groupgen::congruence_filter(a.quotient, m)?;
    Ok(product_power(a, c)?.is_superset_of(&kernel.member_positions))
}

/// Least `C ≤ c_max` with `∏_C A ⊇ G[p^m]`, built incrementally.
pub fn minimal_bounded_gen(a: &SubsetView<'_>, m: u32, c_max: usize) -> Result<Option<usize>> {
    if c_max == 0 || c_max > MAX_PRODUCT_COUNT {
        return Err(SubsetError::ProductCount(c_max));
    }
    let kernel = groupgen::congruence_filter(a.quotient, m)?;
    let mut acc = a.clone();
    for c in 1..=c_max {
        if c > 1 {
            acc = product_set(&acc, a)?;
        }
        if acc.is_superset_of(&kernel.member_positions) {
            return Ok(Some(c));
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommutatorFill {
    /// Least `t` with `∏_t w(G) = [G, G]`, where `∏_0 = {I}`.
    pub t_min: usize,
    /// `|w(G)|`, the number of distinct commutators.
    pub commutators: usize,
    pub derived_order: usize,
    pub group_order: usize,
    pub abelianization: usize,
    /// `t_min ≤ n − m` for a p-group of order `p^n` with abelianization
    /// `p^m`; `None` when the group is not a p-group.
    pub bound_ok: Option<bool>,
}

fn prime_power_exponent(x: usize) -> Option<(usize, u32)> {
    if x < 2 {
        return None;
    }
    let p = (2..=x).find(|d| x.is_multiple_of(*d)).expect("x ≥ 2 has a divisor");
    let mut y = x;
    let mut e = 0;
    while y.is_multiple_of(p) {
        y /= p;
        e += 1;
    }
    (y == 1).then_some((p, e))
}

/// Commutator width of `[G, G]` with respect to `w(G) = {[g1, g2]}`, where
/// `[g1, g2] = g1^-1 g2^-1 g1 g2`.
pub fn commutator_fill(g: &Quotient) -> Result<CommutatorFill> {
    let n = g.order();
    if n > MAX_COMMUTATOR_ORDER {
        return Err(SubsetError::TooLarge(n));
    }
    let inv = g.inverse_table();
    let mut is_comm = vec![false; n];
    for a in 0..n {
        for b in 0..n {
            is_comm[g.commutator(&inv, a, b)] = true;
        }
    }
    let w: Vec<usize> = (0..n).filter(|&i| is_comm[i]).collect();
    let derived = g.subgroup_closure(&w);
    let mut acc = vec![false; n];
    acc[0] = true;
    let mut size = 1;
    let mut t = 0;
    while size < derived.len() {
        let mut next = vec![false; n];
        for x in (0..n).filter(|&x| acc[x]) {
            for &c in &w {
                next[g.mul(x, c)] = true;
            }
        }
        let new_size = next.iter().filter(|&&b| b).count();
        assert!(new_size > size, "commutator products stalled below the derived subgroup");
        acc = next;
        size = new_size;
        t += 1;
    }
    let abelianization = n / derived.len();
    let bound_ok = prime_power_exponent(n).map(|(p, e)| {
        let m = if abelianization == 1 { 0 } else { prime_power_exponent(abelianization).map_or(0, |(_, m)| m) };
        debug_assert!(abelianization == 1 || prime_power_exponent(abelianization).map(|x| x.0) == Some(p));
        t <= (e - m) as usize
    });
    Ok(CommutatorFill {
        t_min: t,
        commutators: w.len(),
        derived_order: derived.len(),
        group_order: n,
        abelianization,
        bound_ok,
    })
}

/// Raw approximate-subgroup statistics of a subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxStats {
    pub size: usize,
    pub tripling_size: usize,
    /// `ln|AAA| / ln|A| − 1`; zero for `|A| = 1`.
    pub tripling_exponent: f64,
    pub group_order: usize,
    /// `ln|A| / ln|G|`, compared against `1 − ε` thresholds by the caller.
    pub size_exponent: f64,
}

pub fn approx_stats(a: &SubsetView<'_>) -> Result<ApproxStats> {
    let aa = product_set(a, a)?;
    let aaa = product_set(&aa, a)?;
    let size = a.len();
    let n = a.quotient.order();
    let tripling_exponent = if size > 1 { (aaa.len() as f64).ln() / (size as f64).ln() - 1.0 } else { 0.0 };
    let size_exponent = if n > 1 { (size as f64).ln() / (n as f64).ln() } else { 1.0 };
    Ok(ApproxStats { size, tripling_size: aaa.len(), tripling_exponent, group_order: n, size_exponent })
}

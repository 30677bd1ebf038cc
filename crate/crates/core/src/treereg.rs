//! Regularization of leaf sets of the rooted k-regular tree of depth n.
//!
//! A leaf is its digit sequence from the root. Leaf sets are kept sorted and
//! flat (`n` digits per leaf), so every vertex at level `i` corresponds to a
//! contiguous run of leaves sharing a length-`i` prefix.
//!
//! All bounds are compared exactly: with `ε = a/b`, an inequality such as
//! `x ≥ k^{lε/2}` is checked as `x^{2b} ≥ k^{la}`.

use std::collections::HashSet;
use std::fmt::{self, Debug, Display};
use std::hash::Hash;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("empty leaf set")]
    EmptyLeafSet,
    #[error("invalid tree shape: k = {k}, n = {n}")]
    Shape { k: BigUint, n: usize },
    #[error("leaf {index} has length {found}, expected {expected}")]
    LeafLength { index: usize, expected: usize, found: usize },
    #[error("leaf {index} has digit {digit} >= k = {k}")]
    DigitRange { index: usize, digit: String, k: BigUint },
    #[error("level {level} out of range 0..={n}")]
    Level { level: usize, n: usize },
    #[error("epsilon must lie in (0, 1], got {0}")]
    Epsilon(String),
    #[error("malformed leaf file: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, TreeError>;

/// Rational `ε = a/b`.
pub type Epsilon = Ratio<u64>;

/// A digit type for leaf labels.
pub trait Digit: Clone + Ord + Hash + Debug + Display + Send + Sync {
    fn to_biguint(&self) -> BigUint;
}

impl Digit for u64 {
    fn to_biguint(&self) -> BigUint {
        BigUint::from(*self)
    }
}

impl Digit for BigUint {
    fn to_biguint(&self) -> BigUint {
        self.clone()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TreeShape {
    k: BigUint,
    n: usize,
}

impl TreeShape {
    pub fn new(k: BigUint, n: usize) -> Result<Self> {
        if k < BigUint::from(2u32) || n == 0 {
            return Err(TreeError::Shape { k, n });
        }
        Ok(TreeShape { k, n })
    }

    pub fn with_k(k: u64, n: usize) -> Result<Self> {
        Self::new(BigUint::from(k), n)
    }

    pub fn k(&self) -> &BigUint {
        &self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// A sorted, deduplicated set of leaves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeafSet<D> {
    shape: TreeShape,
    digits: Vec<D>,
}

impl<D: Digit> LeafSet<D> {
    pub fn new(shape: TreeShape, leaves: Vec<Vec<D>>) -> Result<Self> {
        let n = shape.n;
        for (index, leaf) in leaves.iter().enumerate() {
            if leaf.len() != n {
                return Err(TreeError::LeafLength { index, expected: n, found: leaf.len() });
            }
            if let Some(d) = leaf.iter().find(|d| d.to_biguint() >= shape.k) {
                return Err(TreeError::DigitRange { index, digit: d.to_string(), k: shape.k.clone() });
            }
        }
        let mut leaves = leaves;
        leaves.sort_unstable();
        leaves.dedup();
        Ok(LeafSet { shape, digits: leaves.into_iter().flatten().collect() })
    }

    /// Leaves from sorted, deduplicated flat storage that is already known
    /// to be valid.
    fn from_sorted_flat(shape: TreeShape, digits: Vec<D>) -> Self {
        LeafSet { shape, digits }
    }

    pub fn shape(&self) -> &TreeShape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.digits.len() / self.shape.n
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn leaf(&self, i: usize) -> &[D] {
        let n = self.shape.n;
        &self.digits[i * n..(i + 1) * n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[D]> + '_ {
        self.digits.chunks(self.shape.n)
    }

    pub fn contains(&self, leaf: &[D]) -> bool {
        if leaf.len() != self.shape.n {
            return false;
        }
        let (mut lo, mut hi) = (0, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.leaf(mid).cmp(leaf) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    /// Number of distinct length-`l` prefixes.
    pub fn projection_size(&self, l: usize) -> usize {
        count_prefixes(self.iter(), l)
    }

    fn subset(&self, indices: &[usize]) -> Self {
        let mut digits = Vec::with_capacity(indices.len() * self.shape.n);
        for &i in indices {
            digits.extend_from_slice(self.leaf(i));
        }
        LeafSet::from_sorted_flat(self.shape.clone(), digits)
    }
}

fn count_prefixes<'a, D: PartialEq + 'a>(leaves: impl Iterator<Item = &'a [D]>, l: usize) -> usize {
    let mut count = 0;
    let mut prev: Option<&[D]> = None;
    for leaf in leaves {
        let p = &leaf[..l];
        if prev != Some(p) {
            count += 1;
            prev = Some(p);
        }
    }
    count
}

/// π_{l,n}(A): the distinct length-`l` prefixes, in order.
pub fn project<D: Digit>(a: &LeafSet<D>, l: usize) -> Result<Vec<Vec<D>>> {
    if l > a.shape.n {
        return Err(TreeError::Level { level: l, n: a.shape.n });
    }
    let mut out: Vec<Vec<D>> = Vec::new();
    for leaf in a.iter() {
        if out.last().map(|p| p.as_slice()) != Some(&leaf[..l]) {
            out.push(leaf[..l].to_vec());
        }
    }
    Ok(out)
}

impl LeafSet<u64> {
    /// Every leaf of `T_{k,n}`.
    pub fn full(k: u64, n: usize) -> Result<Self> {
        let shape = TreeShape::with_k(k, n)?;
        let total = k.checked_pow(n as u32).expect("full tree too large") as usize;
        let mut digits = Vec::with_capacity(total * n);
        let mut cur = vec![0u64; n];
        for _ in 0..total {
            digits.extend_from_slice(&cur);
            for pos in (0..n).rev() {
                cur[pos] += 1;
                if cur[pos] < k {
                    break;
                }
                cur[pos] = 0;
            }
        }
        Ok(LeafSet::from_sorted_flat(shape, digits))
    }
}

impl LeafSet<BigUint> {
    /// Parses the text format: a header `k=<k> n=<n>`, then one leaf per line
    /// with comma-separated digits. Blank lines are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| TreeError::Parse("missing header".into()))?;
        let mut k = None;
        let mut n = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("k", v)) => k = v.parse::<BigUint>().ok(),
                Some(("n", v)) => n = v.parse::<usize>().ok(),
                _ => return Err(TreeError::Parse(format!("bad header field {field:?}"))),
            }
        }
        let (k, n) = match (k, n) {
            (Some(k), Some(n)) => (k, n),
            _ => return Err(TreeError::Parse("header must be `k=<k> n=<n>`".into())),
        };
        let shape = TreeShape::new(k, n)?;
        let leaves = lines
            .map(|line| {
                line.split(',')
                    .map(|d| d.trim().parse::<BigUint>().map_err(|_| TreeError::Parse(line.to_string())))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        LeafSet::new(shape, leaves)
    }
}

impl<D: Digit> LeafSet<D> {
    pub fn to_text(&self) -> String {
        let mut out = format!("k={} n={}\n", self.shape.k, self.shape.n);
        for leaf in self.iter() {
            let row: Vec<String> = leaf.iter().map(|d| d.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_biguint_digits(&self) -> LeafSet<BigUint> {
        LeafSet::from_sorted_flat(self.shape.clone(), self.digits.iter().map(Digit::to_biguint).collect())
    }
}

impl<D: Digit> Display for LeafSet<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// One parents step on the leaves `idx` (sorted positions into `a`): the
/// vertices at depth `level` are the children, their parents sit at depth
/// `level - 1`. Returns `(k', retained positions)`.
fn parents_step<D: Digit>(a: &LeafSet<D>, idx: &[usize], level: usize) -> (u64, Vec<usize>) {
    // Parent groups: (start, end) into idx, and the child-group starts inside.
    struct Group {
        children: Vec<usize>,
        end: usize,
    }
    let mut groups: Vec<Group> = Vec::new();
    for (pos, &leaf) in idx.iter().enumerate() {
        let cur = a.leaf(leaf);
        let new_parent = pos == 0 || a.leaf(idx[pos - 1])[..level - 1] != cur[..level - 1];
        let new_child = new_parent || a.leaf(idx[pos - 1])[..level] != cur[..level];
        if new_parent {
            groups.push(Group { children: Vec::new(), end: pos });
        }
        let g = groups.last_mut().expect("group opened");
        if new_child {
            g.children.push(pos);
        }
        g.end = pos + 1;
    }
    let class_of = |deg: usize| usize::BITS - 1 - deg.leading_zeros();
    let top = groups.iter().map(|g| class_of(g.children.len())).max().unwrap_or(0) as usize;
    let mut mass = vec![0u128; top + 1];
    for g in &groups {
        let c = class_of(g.children.len());
        mass[c as usize] += 1u128 << c;
    }
    let best = (0..=top)
        .max_by(|&x, &y| mass[x].cmp(&mass[y]).then(y.cmp(&x)))
        .expect("nonempty");
    let keep = 1usize << best;
    let mut out = Vec::new();
    for g in &groups {
        if class_of(g.children.len()) as usize != best {
            continue;
        }
        let stop = g.children.get(keep).copied().unwrap_or(g.end);
        out.extend_from_slice(&idx[g.children[0]..stop]);
    }
    (keep as u64, out)
}

/// Keeps the dyadic class of parents with the most retained mass; every kept
/// parent keeps exactly `k'` children (its lexicographically smallest ones).
pub fn parents_regularize<D: Digit>(a: &LeafSet<D>) -> Result<(u64, LeafSet<D>)> {
    if a.is_empty() {
        return Err(TreeError::EmptyLeafSet);
    }
    let idx: Vec<usize> = (0..a.len()).collect();
    let (kp, kept) = parents_step(a, &idx, a.shape.n);
    Ok((kp, a.subset(&kept)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegularizationResult<D> {
    pub b: LeafSet<D>,
    pub m: usize,
    pub v: Vec<D>,
    /// `k_m, ..., k_{n-1}`.
    pub degrees: Vec<u64>,
    /// The full chain degrees `k_0, ..., k_{n-1}`.
    pub chain_degrees: Vec<u64>,
    /// `|A_0|, ..., |A_n|`.
    pub chain_sizes: Vec<usize>,
}

fn check_epsilon(eps: Epsilon) -> Result<()> {
    if *eps.numer() == 0 || eps > Epsilon::one() {
        return Err(TreeError::Epsilon(eps.to_string()));
    }
    Ok(())
}

/// `x^{num} < k^{den_exp}` style comparisons on arbitrary precision values.
fn pow(x: &BigUint, e: u64) -> BigUint {
    num_traits::pow(x.clone(), e as usize)
}

/// `m = max{ i in 0..=n : (∏_{j<i} k_j) < k^{iε/2} }`, or 0 when no level
/// qualifies. With `ε = a/b` this reads `(∏_{j<i} k_j)^{2b} < k^{ia}`.
pub fn choose_level(chain_degrees: &[u64], k: &BigUint, eps: Epsilon) -> usize {
    let (a, b) = (*eps.numer(), *eps.denom());
    let mut m = 0;
    let mut prod = BigUint::one();
    for i in 0..=chain_degrees.len() {
        if i > 0 {
            prod *= chain_degrees[i - 1];
        }
        if pow(&prod, 2 * b) < pow(k, i as u64 * a) {
            m = i;
        }
    }
    m
}

/// The chain `A_0 ⊆ ... ⊆ A_n = A`, the level `m`, and `B`.
pub fn regularize<D: Digit>(a: &LeafSet<D>, eps: Epsilon) -> Result<RegularizationResult<D>> {
    check_epsilon(eps)?;
    if a.is_empty() {
        return Err(TreeError::EmptyLeafSet);
    }
    let n = a.shape.n;
    let mut idx: Vec<usize> = (0..a.len()).collect();
    let mut chain_degrees = vec![0u64; n];
    let mut chain_sizes = vec![0usize; n + 1];
    chain_sizes[n] = idx.len();
    for level in (1..=n).rev() {
        let (kp, kept) = parents_step(a, &idx, level);
        chain_degrees[level - 1] = kp;
        idx = kept;
        chain_sizes[level - 1] = idx.len();
    }
    let m = choose_level(&chain_degrees, &a.shape.k, eps);
    let v = a.leaf(idx[0])[..m].to_vec();
    let b_idx: Vec<usize> = idx.into_iter().filter(|&i| a.leaf(i)[..m] == v[..]).collect();
    Ok(RegularizationResult {
        b: a.subset(&b_idx),
        m,
        v,
        degrees: chain_degrees[m..].to_vec(),
        chain_degrees,
        chain_sizes,
    })
}

/// `|A'| ≥ |A| / (2 log₂ k)`, i.e. `k^{2|A'|} ≥ 2^{|A|}`.
pub fn parents_bound_holds(a_len: usize, a_prime_len: usize, k: &BigUint) -> bool {
    pow(k, 2 * a_prime_len as u64).bits() > a_len as u64
}

/// Every prefix at level `i ≥ m` of `b` has exactly `degrees[i - m]` children.
pub fn degree_regular<D: Digit>(b: &LeafSet<D>, m: usize, degrees: &[u64]) -> bool {
    let n = b.shape.n;
    if degrees.len() != n - m {
        return false;
    }
    for (off, &deg) in degrees.iter().enumerate() {
        let level = m + off;
        let mut pos = 0;
        while pos < b.len() {
            let parent = &b.leaf(pos)[..level];
            let mut end = pos;
            while end < b.len() && &b.leaf(end)[..level] == parent {
                end += 1;
            }
            let children = count_prefixes((pos..end).map(|i| b.leaf(i)), level + 1);
            if children as u64 != deg {
                return false;
            }
            pos = end;
        }
    }
    true
}

/// `log₂ x` for arbitrary precision `x > 0`.
pub fn log2_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().expect("fits") as f64).log2();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().expect("fits") as f64;
    top.log2() + shift as f64
}

/// The hypotheses `|A| ≥ k^{nε}` (exact) and `k^{ε/4} > 2 log₂ k` (numeric).
pub fn size_hypotheses_hold(a_len: usize, k: &BigUint, n: usize, eps: Epsilon) -> bool {
    let (a, b) = (*eps.numer(), *eps.denom());
    let big_enough = pow(&BigUint::from(a_len), b) >= pow(k, n as u64 * a);
    let lk = log2_big(k);
    let eps_f = a as f64 / b as f64;
    big_enough && eps_f / 4.0 * lk > (2.0 * lk).log2()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularizationChecks {
    pub degree_regular: bool,
    pub parents_chain: bool,
    pub chain_product: bool,
    pub growth: bool,
    /// `None` unless the size hypotheses verify; then `m ≤ n(1−ε/4)` and
    /// `|B| ≥ k^{nε²/8}`.
    pub conditional: Option<(bool, bool)>,
}

impl RegularizationChecks {
    pub fn all_hold(&self) -> bool {
        self.degree_regular
            && self.parents_chain
            && self.chain_product
            && self.growth
            && self.conditional.is_none_or(|(x, y)| x && y)
    }
}

/// Recomputes every postcondition of [`regularize`] from `a` and its result.
pub fn check_regularization<D: Digit>(a: &LeafSet<D>, r: &RegularizationResult<D>, eps: Epsilon) -> RegularizationChecks {
    let k = &a.shape.k;
    let n = a.shape.n;
    let (ea, eb) = (*eps.numer(), *eps.denom());
    let degree_regular =
        r.b.iter().all(|leaf| leaf[..r.m] == r.v[..]) && degree_regular(&r.b, r.m, &r.degrees);
    // |A_i| ≥ |A| / (2 log₂ k)^{n-i} follows from these step bounds.
    let parents_chain = (1..=n).all(|i| parents_bound_holds(r.chain_sizes[i], r.chain_sizes[i - 1], k));
    let product: u128 = r.chain_degrees.iter().map(|&d| d as u128).product();
    let chain_product = product == r.chain_sizes[0] as u128;
    let growth = (r.m + 1..=n).all(|l| {
        let size = r.b.projection_size(l);
        let prod: u128 = r.degrees[..l - r.m].iter().map(|&d| d as u128).product();
        size as u128 == prod && pow(&BigUint::from(size), 2 * eb) >= pow(k, (l - r.m) as u64 * ea)
    });
    let conditional = size_hypotheses_hold(a.len(), k, n, eps).then(|| {
        let m_ok = 4 * eb * r.m as u64 <= n as u64 * (4 * eb - ea);
        let b_ok = pow(&BigUint::from(r.b.len()), 8 * eb * eb) >= pow(k, n as u64 * ea * ea);
        (m_ok, b_ok)
    });
    RegularizationChecks { degree_regular, parents_chain, chain_product, growth, conditional }
}

/// `log₂ K(ε)`: the largest root of `(ε/4) x = 1 + log₂ x`, so that
/// `K^{ε/4} ≥ 2 log₂ K` holds for every `K ≥ K(ε)`.
pub fn log2_k_eps(eps: f64) -> f64 {
    assert!(eps > 0.0, "epsilon must be positive");
    let f = |x: f64| eps / 4.0 * x - 1.0 - x.log2();
    // f is convex with its minimum at 4 / (ε ln 2); the largest root lies to
    // the right of it.
    let mut lo = 4.0 / (eps * std::f64::consts::LN_2);
    if f(lo) >= 0.0 {
        return lo.max(1.0);
    }
    let mut hi = lo * 2.0;
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Smallest `s ≥ 1` with `k^s ≥ K(ε)`.
pub fn block_size(k: &BigUint, eps: Epsilon) -> usize {
    let x = log2_k_eps(eps.to_f64().expect("finite"));
    let lk = log2_big(k);
    ((x / lk).ceil() as usize).max(1)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockRegularization<D> {
    /// Block size `s`.
    pub s: usize,
    /// `log₂ K(ε)`.
    pub log2_k_eps: u64,
    /// `⌊n/s⌋`.
    pub block_depth: usize,
    /// Result on `T_{k^s, ⌊n/s⌋}` at `ε/2`; `None` when `⌊n/s⌋ = 0`.
    pub block: Option<RegularizationResult<BigUint>>,
    /// `B ⊆ A`: all leaves whose block label lies in the block result.
    pub b: LeafSet<D>,
    /// `m = s·m'`.
    pub m: usize,
    pub v: Vec<D>,
}

/// Regularization on the coarsened tree `T_{k^s, ⌊n/s⌋}`, lifted back.
pub fn block_regularize<D: Digit>(a: &LeafSet<D>, eps: Epsilon) -> Result<BlockRegularization<D>> {
    check_epsilon(eps)?;
    if a.is_empty() {
        return Err(TreeError::EmptyLeafSet);
    }
    let k = &a.shape.k;
    let s = block_size(k, eps);
    let x = log2_k_eps(eps.to_f64().expect("finite"));
    let depth = a.shape.n / s;
    if depth == 0 {
        return Ok(BlockRegularization {
            s,
            log2_k_eps: x.ceil() as u64,
            block_depth: 0,
            block: None,
            b: a.clone(),
            m: 0,
            v: Vec::new(),
        });
    }
    let big_k = pow(k, s as u64);
    let label = |leaf: &[D]| -> Vec<BigUint> {
        (0..depth)
            .map(|blk| {
                leaf[blk * s..(blk + 1) * s]
                    .iter()
                    .fold(BigUint::zero(), |acc, d| acc * k + d.to_biguint())
            })
            .collect()
    };
    let blocks: Vec<Vec<BigUint>> = a.iter().map(label).collect();
    let coarse = LeafSet::new(TreeShape::new(big_k, depth)?, blocks)?;
    let half = eps / Epsilon::from_integer(2);
    let res = regularize(&coarse, half)?;
    let keep: HashSet<&[BigUint]> = res.b.iter().collect();
    let b_idx: Vec<usize> = (0..a.len()).filter(|&i| keep.contains(label(a.leaf(i)).as_slice())).collect();
    let b = a.subset(&b_idx);
    let m = s * res.m;
    let v = b.leaf(0)[..m].to_vec();
    Ok(BlockRegularization { s, log2_k_eps: x.ceil() as u64, block_depth: depth, block: Some(res), b, m, v })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(k: u64, n: usize, leaves: &[&[u64]]) -> LeafSet<u64> {
        LeafSet::new(TreeShape::with_k(k, n).unwrap(), leaves.iter().map(|l| l.to_vec()).collect()).unwrap()
    }

    fn eps(a: u64, b: u64) -> Epsilon {
        Epsilon::new(a, b)
    }

    #[test]
    fn project_examples() {
        let a = set(2, 2, &[&[0, 0], &[0, 1], &[1, 0]]);
        assert_eq!(project(&a, 2).unwrap().len(), 3);
        assert_eq!(project(&a, 0).unwrap(), vec![Vec::<u64>::new()]);
        assert_eq!(project(&a, 1).unwrap(), vec![vec![0], vec![1]]);
        assert!(project(&a, 3).is_err());
        let empty = LeafSet::<u64>::new(TreeShape::with_k(2, 2).unwrap(), vec![]).unwrap();
        assert!(project(&empty, 0).unwrap().is_empty());
    }

    #[test]
    fn validation() {
        let shape = TreeShape::with_k(3, 2).unwrap();
        assert!(LeafSet::new(shape.clone(), vec![vec![0u64, 3]]).is_err());
        assert!(LeafSet::new(shape, vec![vec![0u64]]).is_err());
        assert!(TreeShape::with_k(1, 2).is_err());
        assert!(TreeShape::with_k(2, 0).is_err());
    }

    #[test]
    fn parents_examples() {
        let a = set(4, 1, &[&[0], &[1], &[3]]);
        let (kp, ap) = parents_regularize(&a).unwrap();
        assert_eq!((kp, ap.len()), (2, 2));
        assert_eq!(ap.leaf(0), &[0]);
        assert_eq!(ap.leaf(1), &[1]);

        let a = set(4, 2, &[&[0, 0], &[0, 1], &[0, 2], &[1, 3]]);
        let (kp, ap) = parents_regularize(&a).unwrap();
        assert_eq!((kp, ap.len()), (2, 2));
        assert!(parents_bound_holds(4, 2, &BigUint::from(4u32)));

        let full = LeafSet::full(4, 2).unwrap();
        let (kp, ap) = parents_regularize(&full).unwrap();
        assert_eq!((kp, ap.len()), (4, 16));

        let empty = LeafSet::<u64>::new(TreeShape::with_k(2, 1).unwrap(), vec![]).unwrap();
        assert_eq!(parents_regularize(&empty), Err(TreeError::EmptyLeafSet));
    }

    #[test]
    fn regularize_examples() {
        let full = LeafSet::full(2, 3).unwrap();
        let r = regularize(&full, eps(1, 1)).unwrap();
        assert_eq!((r.m, r.b.len(), r.degrees.clone()), (0, 8, vec![2, 2, 2]));
        assert!(check_regularization(&full, &r, eps(1, 1)).all_hold());

        let single = set(5, 3, &[&[1, 2, 3]]);
        let r = regularize(&single, eps(1, 2)).unwrap();
        assert_eq!(r.chain_degrees, vec![1, 1, 1]);
        assert_eq!(r.m, 3);
        assert_eq!(r.b, single);
        assert!(check_regularization(&single, &r, eps(1, 2)).all_hold());

        let full = LeafSet::full(4, 2).unwrap();
        let r = regularize(&full, eps(1, 1)).unwrap();
        assert_eq!((r.m, r.b.len(), r.chain_degrees.clone()), (0, 16, vec![4, 4]));
    }

    #[test]
    fn level_choice() {
        // Products 1, 2, 4 against 4^{i/2} = 1, 2, 4: never strictly below.
        assert_eq!(choose_level(&[2, 2], &BigUint::from(4u32), eps(1, 1)), 0);
        // Degrees 1 then 4 on k = 4: level 1 qualifies (1 < 2), level 2 not (4 = 4).
        assert_eq!(choose_level(&[1, 4], &BigUint::from(4u32), eps(1, 1)), 1);
        assert_eq!(choose_level(&[1, 1], &BigUint::from(4u32), eps(1, 1)), 2);
    }

    #[test]
    fn conditional_bounds_on_large_branching() {
        let k = 1u64 << 22;
        let a = LeafSet::full(k, 1).unwrap();
        assert!(size_hypotheses_hold(a.len(), a.shape().k(), 1, eps(1, 1)));
        let r = regularize(&a, eps(1, 1)).unwrap();
        let checks = check_regularization(&a, &r, eps(1, 1));
        assert_eq!(checks.conditional, Some((true, true)));
        assert!(checks.all_hold());
    }

    #[test]
    fn k_eps_root() {
        let x = log2_k_eps(1.0);
        assert!((x / 4.0 - 1.0 - x.log2()).abs() < 1e-6);
        // Just above the root the inequality holds, just below it fails.
        assert!((x + 0.01) / 4.0 >= 1.0 + (x + 0.01).log2());
        assert!((x - 0.01) / 4.0 < 1.0 + (x - 0.01).log2());
        assert_eq!(block_size(&BigUint::from(2u32), eps(1, 1)), x.ceil() as usize);
        assert_eq!(block_size(&(BigUint::one() << 40u32), eps(1, 1)), 1);
    }

    #[test]
    fn block_examples() {
        // k ≥ K(ε): s = 1 and the block result is regularize at ε/2.
        let k = 1u64 << 23;
        let a = set(k, 2, &[&[0, 0], &[0, 5], &[7, 1], &[7, 2], &[9, 9]]);
        let blk = block_regularize(&a, eps(1, 1)).unwrap();
        assert_eq!(blk.s, 1);
        let direct = regularize(&a, eps(1, 2)).unwrap();
        assert_eq!(blk.b, direct.b);
        assert_eq!(blk.m, direct.m);

        let full = LeafSet::full(2, 12).unwrap();
        let blk = block_regularize(&full, eps(1, 1)).unwrap();
        assert_eq!(blk.s, log2_k_eps(1.0).ceil() as usize);
        assert_eq!(blk.b.len(), full.len());
        assert!(degree_regular(&blk.b, blk.m, &vec![2; 12 - blk.m]));

        let single = set(2, 30, &[&[1; 30]]);
        let blk = block_regularize(&single, eps(1, 1)).unwrap();
        assert_eq!(blk.b, single);
        assert_eq!(blk.m, blk.s * (30 / blk.s));
    }

    #[test]
    fn text_round_trip() {
        let a = set(3, 2, &[&[2, 1], &[0, 0]]);
        let text = a.to_text();
        assert_eq!(text, "k=3 n=2\n0,0\n2,1\n");
        let back = LeafSet::from_text(&text).unwrap();
        assert_eq!(back, a.to_biguint_digits());
        assert!(LeafSet::from_text("n=2\n0,0").is_err());
    }
}

//! Finite congruence quotients π_q(Γ), their Cayley graphs and congruence
//! kernels.
//!
//! Elements of a [`Quotient`] are stored flat, `dim * dim` words per element.
//! Positions follow BFS discovery: every word-length layer is sorted
//! lexicographically by entries before positions are assigned, so indices do
//! not depend on hash iteration order. The identity is always position 0.

use std::collections::HashMap;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modring::{self, ModError, Modulus, RationalMatrix, ResidueMatrix};

/// Default guard on the number of enumerated elements.
pub const DEFAULT_MAX_ORDER: usize = 2_000_000;

/// Environment variable overriding [`DEFAULT_MAX_ORDER`].
pub const MAX_ORDER_ENV: &str = "SUPERAPPROX_MAX_ORDER";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error(transparent)]
    Mod(#[from] ModError),
    #[error("quotient too large: more than {max_order} elements ({partial} found)")]
    QuotientTooLarge { max_order: usize, partial: usize },
    #[error("generator set is empty")]
    EmptyGenerators,
    #[error("generator {0} is not invertible")]
    NotInvertible(usize),
    #[error("generator {index} has dimension {found}, expected {expected}")]
    Dimension { index: usize, expected: usize, found: usize },
    #[error("level {level} exceeds modulus exponent {exponent}")]
    LevelExceedsModulus { level: u32, exponent: u32 },
    #[error("modulus {0} is not a prime power")]
    NotPrimePower(String),
    #[error("not in congruence kernel")]
    NotInCongruenceKernel,
    #[error("invalid generator document: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, GroupError>;

/// [`DEFAULT_MAX_ORDER`] unless overridden through [`MAX_ORDER_ENV`].
pub fn default_max_order() -> usize {
    std::env::var(MAX_ORDER_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_ORDER)
}

/// A symmetric generating set Ω ⊂ GL_n(Z[1/q0]).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorSet {
    q0: u64,
    dim: usize,
    generators: Vec<RationalMatrix>,
    symmetric_closure: bool,
}

/// JSON form of a generator set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorDocument {
    pub q0: u64,
    pub dimension: usize,
    #[serde(default)]
    pub denominator_exponents: Vec<u32>,
    pub matrices: Vec<Vec<Vec<i64>>>,
}

impl GeneratorSet {
    /// Adjoins exact inverses. Each matrix is followed by its inverse unless
    /// that inverse (or the matrix itself) is already present, so the result
    /// reads `[A, A^-1, B, B^-1, ...]`.
    pub fn new(q0: u64, matrices: Vec<RationalMatrix>) -> Result<Self> {
        let dim = matrices.first().ok_or(GroupError::EmptyGenerators)?.dim();
        let mut generators: Vec<RationalMatrix> = Vec::with_capacity(2 * matrices.len());
        for (index, m) in matrices.into_iter().enumerate() {
            if m.dim() != dim {
                return Err(GroupError::Dimension { index, expected: dim, found: m.dim() });
            }
            assert_eq!(m.q0(), q0, "generator built with a different q0");
            let inv = m.inverse().map_err(|_| GroupError::NotInvertible(index))?;
            for g in [m, inv] {
                if !generators.contains(&g) {
                    generators.push(g);
                }
            }
        }
        Ok(GeneratorSet { q0, dim, generators, symmetric_closure: true })
    }

    pub fn from_document(doc: &GeneratorDocument) -> Result<Self> {
        let n = doc.dimension;
        let mut mats = Vec::with_capacity(doc.matrices.len());
        for (i, rows) in doc.matrices.iter().enumerate() {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(GroupError::Format(format!("matrix {i} is not {n}x{n}")));
            }
            let e = match doc.denominator_exponents.get(i) {
                Some(&e) => e,
                None if doc.denominator_exponents.is_empty() => 0,
                None => {
                    return Err(GroupError::Format("denominator_exponents length mismatch".into()))
                }
            };
            let nums = rows.iter().flatten().map(|&x| BigInt::from(x)).collect();
            mats.push(RationalMatrix::new(n, nums, doc.q0.max(1), e)?);
        }
        Self::new(doc.q0.max(1), mats)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GeneratorDocument =
            serde_json::from_str(text).map_err(|e| GroupError::Format(e.to_string()))?;
        Self::from_document(&doc)
    }

    /// Integer generators with `q0 = 1`, inverses adjoined.
    pub fn from_integer_matrices(dim: usize, mats: &[Vec<i64>]) -> Result<Self> {
        let mats = mats
            .iter()
            .map(|m| RationalMatrix::from_i64(dim, m, 1))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(1, mats)
    }

    /// ±[[1,1],[0,1]], ±[[1,0],[1,1]], generating SL2(Z).
    pub fn sl2_elementary() -> Self {
        Self::from_integer_matrices(2, &[vec![1, 1, 0, 1], vec![1, 0, 1, 1]]).expect("valid")
    }

    /// ±[[1,1],[0,1]], generating a copy of Z.
    pub fn unipotent() -> Self {
        Self::from_integer_matrices(2, &[vec![1, 1, 0, 1]]).expect("valid")
    }

    /// ±(I + E_{i,i+1}), generating the upper unitriangular integer group.
    pub fn unitriangular(dim: usize) -> Self {
        assert!(dim >= 2, "unitriangular group needs dimension at least 2");
        let mats: Vec<Vec<i64>> = (0..dim - 1)
            .map(|i| {
                let mut m = vec![0i64; dim * dim];
                for d in 0..dim {
                    m[d * dim + d] = 1;
                }
                m[i * dim + i + 1] = 1;
                m
            })
            .collect();
        Self::from_integer_matrices(dim, &mats).expect("valid")
    }

    pub fn q0(&self) -> u64 {
        self.q0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[RationalMatrix] {
        &self.generators
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn is_symmetric_closure(&self) -> bool {
        self.symmetric_closure
    }

    pub fn reduce(&self, q: &Modulus) -> Result<Vec<ResidueMatrix>> {
        q.ensure_coprime_to(self.q0)?;
        self.generators
            .iter()
            .map(|g| modring::reduce_matrix(g, q).map_err(GroupError::from))
            .collect()
    }
}

/// A finite quotient with generator-action tables.
#[derive(Clone, Debug)]
pub struct Quotient {
    modulus: Modulus,
    q: u64,
    dim: usize,
    data: Vec<u64>,
    index: HashMap<Box<[u64]>, u32>,
    generators: Vec<ResidueMatrix>,
    gen_action: Vec<Vec<u32>>,
}

/// BFS closure of `⟨π_q(Ω)⟩`.
pub fn enumerate_quotient(omega: &GeneratorSet, q: &Modulus, max_order: usize) -> Result<Quotient> {
    Quotient::from_residues(q, omega.reduce(q)?, max_order)
}

impl Quotient {
    /// Closure of arbitrary residue generators. The generator list is used as
    /// given; symmetric input is the caller's responsibility.
    pub fn from_residues(q: &Modulus, generators: Vec<ResidueMatrix>, max_order: usize) -> Result<Self> {
        let first = generators.first().ok_or(GroupError::EmptyGenerators)?;
        let dim = first.dim();
        let qw = q.word()?;
        let mut gens = Vec::with_capacity(generators.len());
        for (i, g) in generators.into_iter().enumerate() {
            if g.dim() != dim {
                return Err(GroupError::Dimension { index: i, expected: dim, found: g.dim() });
            }
            let g = if g.modulus() == q { g } else { g.reduce_to(q)? };
            if g.inverse().is_none() {
                return Err(GroupError::NotInvertible(i));
            }
            gens.push(g);
        }
        let sq = dim * dim;
        let identity = ResidueMatrix::identity(dim, q)?;
        let mut data: Vec<u64> = identity.entries().to_vec();
        let mut index: HashMap<Box<[u64]>, u32> = HashMap::new();
        index.insert(identity.entries().into(), 0);

        let mut layer_start = 0usize;
        let mut buf = vec![0u64; sq];
        loop {
            let layer_end = data.len() / sq;
            let mut fresh: Vec<Box<[u64]>> = Vec::new();
            for pos in layer_start..layer_end {
                for g in &gens {
                    modring::mul_into(dim, qw, &data[pos * sq..(pos + 1) * sq], g.entries(), &mut buf);
                    if !index.contains_key(buf.as_slice()) {
                        fresh.push(buf.as_slice().into());
                    }
                }
            }
            if fresh.is_empty() {
                break;
            }
            fresh.sort_unstable();
            fresh.dedup();
            if layer_end + fresh.len() > max_order {
                return Err(GroupError::QuotientTooLarge {
                    max_order,
                    partial: layer_end + fresh.len(),
                });
            }
            for (offset, key) in fresh.into_iter().enumerate() {
                data.extend_from_slice(&key);
                index.insert(key, (layer_end + offset) as u32);
            }
            layer_start = layer_end;
        }

        let order = data.len() / sq;
        let gen_action = gens
            .iter()
            .map(|g| {
                (0..order)
                    .map(|pos| {
                        modring::mul_into(dim, qw, &data[pos * sq..(pos + 1) * sq], g.entries(), &mut buf);
                        index[buf.as_slice()]
                    })
                    .collect()
            })
            .collect();
        Ok(Quotient { modulus: q.clone(), q: qw, dim, data, index, generators: gens, gen_action })
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.data.len() / (self.dim * self.dim)
    }

    /// Entries of the element at `pos`, row-major.
    pub fn element(&self, pos: usize) -> &[u64] {
        let sq = self.dim * self.dim;
        &self.data[pos * sq..(pos + 1) * sq]
    }

    pub fn element_matrix(&self, pos: usize) -> ResidueMatrix {
        ResidueMatrix::new(self.dim, self.element(pos).to_vec(), &self.modulus).expect("member")
    }

    pub fn position(&self, entries: &[u64]) -> Option<usize> {
        self.index.get(entries).map(|&p| p as usize)
    }

    pub fn position_of(&self, m: &ResidueMatrix) -> Option<usize> {
        if m.modulus() != &self.modulus {
            return None;
        }
        self.position(m.entries())
    }

    pub fn generators(&self) -> &[ResidueMatrix] {
        &self.generators
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    /// Permutation `pos -> position of element(pos) * generator(s)`.
    pub fn gen_action(&self, s: usize) -> &[u32] {
        &self.gen_action[s]
    }

    pub fn generator_positions(&self) -> Vec<usize> {
        self.gen_action.iter().map(|a| a[0] as usize).collect()
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        let sq = self.dim * self.dim;
        if sq <= 16 {
            let mut buf = [0u64; 16];
            modring::mul_into(self.dim, self.q, self.element(a), self.element(b), &mut buf[..sq]);
            self.index[&buf[..sq]] as usize
        } else {
            let mut buf = vec![0u64; sq];
            modring::mul_into(self.dim, self.q, self.element(a), self.element(b), &mut buf);
            self.index[buf.as_slice()] as usize
        }
    }

    pub fn inverse(&self, a: usize) -> usize {
        let inv = modring::inverse_words(self.dim, self.element(a), &self.modulus)
            .expect("quotient elements are invertible");
        self.index[inv.as_slice()] as usize
    }

    /// Inverse of every element, indexed by position.
    pub fn inverse_table(&self) -> Vec<u32> {
        (0..self.order()).map(|a| self.inverse(a) as u32).collect()
    }

    /// Commutator `a^-1 b^-1 a b` given an inverse table.
    pub fn commutator(&self, inv: &[u32], a: usize, b: usize) -> usize {
        let left = self.mul(inv[a] as usize, inv[b] as usize);
        self.mul(self.mul(left, a), b)
    }

    /// Sorted positions of the subgroup generated by `gens`.
    pub fn subgroup_closure(&self, gens: &[usize]) -> Vec<usize> {
        let mut member = vec![false; self.order()];
        member[0] = true;
        let mut members = vec![0usize];
        let mut frontier = 0;
        while frontier < members.len() {
            let x = members[frontier];
            frontier += 1;
            for &g in gens {
                let y = self.mul(x, g);
                if !member[y] {
                    member[y] = true;
                    members.push(y);
                }
            }
        }
        members.sort_unstable();
        members
    }

    /// `p` and `n` when the modulus is `p^n`.
    pub fn prime_power(&self) -> Result<(u64, u32)> {
        self.modulus
            .as_prime_power()
            .ok_or_else(|| GroupError::NotPrimePower(self.modulus.to_string()))
    }
}

/// The directed arcs `(u, u·s, s)` of the Cayley graph. Every generator
/// contributes one arc per vertex, so multiplicity is preserved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CayleyGraph {
    pub vertices: usize,
    pub arcs: Vec<(u32, u32, u32)>,
}

impl CayleyGraph {
    pub fn degree(&self) -> usize {
        self.arcs.len().checked_div(self.vertices).unwrap_or(0)
    }

    /// Undirected edges counted with multiplicity (each edge is two arcs).
    pub fn undirected_edge_count(&self) -> usize {
        self.arcs.len() / 2
    }

    /// One `u v gen_index` line per arc.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::with_capacity(self.arcs.len() * 12);
        for &(u, v, g) in &self.arcs {
            s.push_str(&format!("{u} {v} {g}\n"));
        }
        s
    }
}

pub fn cayley_graph(g: &Quotient) -> CayleyGraph {
    let mut arcs = Vec::with_capacity(g.order() * g.num_generators());
    for u in 0..g.order() {
        for s in 0..g.num_generators() {
            arcs.push((u as u32, g.gen_action[s][u], s as u32));
        }
    }
    CayleyGraph { vertices: g.order(), arcs }
}

/// Elements congruent to the identity modulo `p^level`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelFilter {
    pub level: u32,
    pub member_positions: Vec<usize>,
}

impl KernelFilter {
    pub fn len(&self) -> usize {
        self.member_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_positions.is_empty()
    }
}

pub fn congruence_filter(g: &Quotient, m: u32) -> Result<KernelFilter> {
    let (p, n) = g.prime_power()?;
    if m > n {
        return Err(GroupError::LevelExceedsModulus { level: m, exponent: n });
    }
    let pm = p.pow(m);
    let member_positions = (0..g.order())
        .filter(|&pos| modring::is_identity_mod(g.dim(), g.element(pos), pm))
        .collect();
    Ok(KernelFilter { level: m, member_positions })
}

/// `(g - I) / p^a mod p` for `g ≡ I mod p^a`. The modulus of `g` must be a
/// power `p^N` with `N ≥ a + 1`.
pub fn finite_log(g: &ResidueMatrix, a: u32) -> Result<ResidueMatrix> {
    let (p, n) = g
        .modulus()
        .as_prime_power()
        .ok_or_else(|| GroupError::NotPrimePower(g.modulus().to_string()))?;
    if a == 0 || a + 1 > n {
        return Err(GroupError::LevelExceedsModulus { level: a + 1, exponent: n });
    }
    let pa = p.pow(a);
    let pa1 = pa * p;
    let dim = g.dim();
    if !modring::is_identity_mod(dim, g.entries(), pa) {
        return Err(GroupError::NotInCongruenceKernel);
    }
    let entries = g
        .entries()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x % pa1;
            let shifted = if i / dim == i % dim { (x + pa1 - 1) % pa1 } else { x };
            (shifted / pa) % p
        })
        .collect();
    Ok(ResidueMatrix::new(dim, entries, &Modulus::prime_power(p, 1)?)?)
}

/// Sorted positions of the derived subgroup `[G, G]`, built from every
/// commutator pair.
pub fn derived_subgroup(g: &Quotient) -> Vec<usize> {
    let inv = g.inverse_table();
    let order = g.order();
    let mut member = vec![false; order];
    member[0] = true;
    let mut members = vec![0usize];
    let mut gens: Vec<usize> = Vec::new();
    for a in 0..order {
        for b in 0..order {
            let c = g.commutator(&inv, a, b);
            if member[c] {
                continue;
            }
            gens.push(c);
            // Re-close: extend the member set by right multiplication.
            let mut frontier = 0;
            let mut queue = members.clone();
            while frontier < queue.len() {
                let x = queue[frontier];
                frontier += 1;
                for &s in &gens {
                    let y = g.mul(x, s);
                    if !member[y] {
                        member[y] = true;
                        queue.push(y);
                    }
                }
            }
            members = queue;
            if members.len() == order {
                members.sort_unstable();
                return members;
            }
        }
    }
    members.sort_unstable();
    members
}

/// `|G / [G, G]|`.
pub fn abelianization_order(g: &Quotient) -> usize {
    g.order() / derived_subgroup(g).len()
}

/// The set of `p^m`-th powers and the congruence kernel `U[p^m]`, both as
/// sorted positions.
pub fn unipotent_power_images(g: &Quotient, m: u32) -> Result<(Vec<usize>, Vec<usize>)> {
    let (p, _) = g.prime_power()?;
    let kernel = congruence_filter(g, m)?.member_positions;
    let e = p.pow(m);
    let mut powers: Vec<usize> = (0..g.order())
        .map(|pos| {
            let x = g.element_matrix(pos).pow(e);
            g.position_of(&x).expect("powers stay in the group")
        })
        .collect();
    powers.sort_unstable();
    powers.dedup();
    Ok((powers, kernel))
}

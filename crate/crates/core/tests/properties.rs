//! Randomized checks of the module invariants.

use std::collections::HashSet;

use num_bigint::{BigInt, BigUint};
use num_rational::Ratio;
use proptest::prelude::*;

use superapprox::approxsub::{product_power, product_set, SubsetView};
use superapprox::groupgen::{congruence_filter, enumerate_quotient, GeneratorSet, Quotient, DEFAULT_MAX_ORDER};
use superapprox::modring::{crt_combine, crt_split, valuation, Modulus, RationalMatrix, ResidueMatrix};
use superapprox::padic::{
    combinations, curve_reduce, divided_difference, divided_difference_closed_form, max_minor_norm, AnalyticMap,
    MinorNorm,
};
use superapprox::spectral::{apply_operator, spectral_gap_dense, spectral_gap_power, walk_distribution};
use superapprox::treereg::{check_regularization, parents_bound_holds, parents_regularize, regularize, LeafSet};

fn quotient(gens: &GeneratorSet, q: u64) -> Quotient {
    enumerate_quotient(gens, &Modulus::from_u64(q).unwrap(), DEFAULT_MAX_ORDER).unwrap()
}

fn big(xs: &[i64]) -> Vec<BigInt> {
    xs.iter().map(|&x| BigInt::from(x)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reduction_is_multiplicative(
        a in prop::collection::vec(-40i64..40, 4),
        b in prop::collection::vec(-40i64..40, 4),
        q in prop::sample::select(vec![3u64, 5, 9, 15, 25, 49, 121, 1001, 3 * 5 * 7 * 11 * 13]),
    ) {
        let ra = RationalMatrix::from_i64(2, &a, 2).unwrap();
        let rb = RationalMatrix::from_i64(2, &b, 2).unwrap();
        let q = Modulus::from_u64(q).unwrap();
        let lhs = ra.mul(&rb).reduce(&q).unwrap();
        let rhs = ra.reduce(&q).unwrap().mul(&rb.reduce(&q).unwrap());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn crt_round_trip(x in 0u64..1_000_000_000, q in prop::sample::select(vec![
        2u64 * 3 * 5 * 7, 9 * 25 * 49, 8 * 27 * 125 * 11, 1_000_000_007, 999_999_937 * 2,
    ])) {
        let q = Modulus::from_u64(q).unwrap();
        let x = BigUint::from(x) % q.value();
        prop_assert_eq!(crt_combine(&crt_split(&x, &q), &q).unwrap(), x);
    }

    #[test]
    fn valuation_of_scaled_unit(a in 0u32..20, u in 1i64..1_000_000, p in prop::sample::select(vec![2u64, 3, 5, 7, 101])) {
        let u = if u % p as i64 == 0 { u + 1 } else { u };
        let x = num_traits::pow(BigInt::from(p), a as usize) * BigInt::from(u);
        prop_assert_eq!(valuation(&x, p).unwrap(), a);
        prop_assert_eq!(valuation(&-x, p).unwrap(), a);
    }

    #[test]
    fn residue_inverse(e in prop::collection::vec(0u64..1000, 9), q in prop::sample::select(vec![7u64, 27, 35, 121, 1000])) {
        let q = Modulus::from_u64(q).unwrap();
        let m = ResidueMatrix::new(3, e.iter().map(|x| x % q.word().unwrap()).collect(), &q).unwrap();
        if let Some(inv) = m.inverse() {
            prop_assert!(m.mul(&inv).is_identity());
            prop_assert!(inv.mul(&m).is_identity());
        }
    }
}

#[test]
fn quotients_are_closed_and_kernels_divide() {
    let cases = [
        (GeneratorSet::sl2_elementary(), vec![2u64, 3, 4, 5, 7, 8, 9, 25, 27]),
        (GeneratorSet::unitriangular(3), vec![3, 5, 9, 25]),
        (GeneratorSet::unipotent(), vec![7, 16, 101]),
    ];
    for (gens, qs) in &cases {
        for &q in qs {
            let g = quotient(gens, q);
            assert!(g.element_matrix(0).is_identity());
            for s in 0..g.num_generators() {
                let act = g.gen_action(s);
                let distinct: HashSet<u32> = act.iter().copied().collect();
                assert_eq!(distinct.len(), g.order(), "generator action is a permutation");
                for x in 0..g.order() {
                    let y = g.element_matrix(x).mul(&g.generators()[s]);
                    assert_eq!(g.position_of(&y), Some(act[x] as usize));
                }
            }
            if let Ok((_, n)) = g.prime_power() {
                for m in 0..=n {
                    let k = congruence_filter(&g, m).unwrap();
                    assert_eq!(g.order() % k.len(), 0);
                    if m == 0 {
                        assert_eq!(k.len(), g.order());
                    }
                    if m == n {
                        assert_eq!(k.member_positions, vec![0]);
                    }
                }
            }
        }
    }
}

#[test]
fn sl2_kernel_layers_have_p_cubed_elements() {
    for (p, n) in [(5u64, 2u32), (7, 2), (3, 3)] {
        let g = quotient(&GeneratorSet::sl2_elementary(), p.pow(n));
        for m in 1..n {
            let a = congruence_filter(&g, m).unwrap().len();
            let b = congruence_filter(&g, m + 1).unwrap().len();
            assert_eq!(a / b, (p * p * p) as usize, "p = {p}, m = {m}");
        }
    }
}

fn transition_matrix(g: &Quotient) -> nalgebra::DMatrix<f64> {
    let n = g.order();
    let k = g.num_generators() as f64;
    let mut t = nalgebra::DMatrix::zeros(n, n);
    for x in 0..n {
        for s in g.generators() {
            let y = g.position_of(&g.element_matrix(x).mul(s)).unwrap();
            t[(x, y)] += 1.0 / k;
        }
    }
    t
}

#[test]
fn walk_matches_matrix_powers() {
    let groups = [
        quotient(&GeneratorSet::sl2_elementary(), 3),
        quotient(&GeneratorSet::sl2_elementary(), 5),
        quotient(&GeneratorSet::unitriangular(3), 3),
        quotient(&GeneratorSet::unipotent(), 11),
        quotient(&GeneratorSet::unipotent(), 12),
    ];
    for g in &groups {
        let t = transition_matrix(g);
        assert_eq!(t, t.transpose(), "averaging operator is symmetric");
        let mut power = nalgebra::DMatrix::identity(g.order(), g.order());
        for l in 0..=20 {
            if l > 0 {
                power = &power * &t;
            }
            let walk = walk_distribution(g, l);
            // P^{(l)}(x) = (T^l δ_x)(e) = (T^l)(e, x).
            for x in 0..g.order() {
                assert!((walk[x] - power[(0, x)]).abs() <= 1e-10);
            }
        }
        let f: Vec<f64> = (0..g.order()).map(|i| ((i * 37) % 11) as f64).collect();
        let mut out = vec![0.0; g.order()];
        apply_operator(g, &f, &mut out);
        let want = &t * nalgebra::DVector::from_vec(f);
        for (a, b) in out.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn dense_and_power_iteration_agree() {
    let groups = [
        quotient(&GeneratorSet::sl2_elementary(), 5),
        quotient(&GeneratorSet::sl2_elementary(), 7),
        quotient(&GeneratorSet::sl2_elementary(), 9),
        quotient(&GeneratorSet::sl2_elementary(), 11),
        quotient(&GeneratorSet::unitriangular(3), 5),
        quotient(&GeneratorSet::unitriangular(3), 7),
        quotient(&GeneratorSet::unipotent(), 101),
        quotient(&GeneratorSet::unipotent(), 1000),
    ];
    for g in &groups {
        assert!((100..=4000).contains(&g.order()));
        let dense = spectral_gap_dense(g);
        let power = spectral_gap_power(g, 1e-11, 2_000_000, 7);
        assert!(power.converged, "order {}", g.order());
        assert!((dense.lambda - power.lambda).abs() <= 1e-7, "order {}: {} vs {}", g.order(), dense.lambda, power.lambda);
    }
}

fn leaf_strategy() -> impl Strategy<Value = LeafSet<u64>> {
    (2u64..=64, 1usize..=6).prop_flat_map(|(k, n)| {
        prop::collection::vec(prop::collection::vec(0..k, n), 1..300)
            .prop_map(move |leaves| LeafSet::new(superapprox::treereg::TreeShape::with_k(k, n).unwrap(), leaves).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn parents_step_is_uniform_and_keeps_mass(a in leaf_strategy()) {
        let (kp, b) = parents_regularize(&a).unwrap();
        prop_assert!(kp.is_power_of_two());
        let n = a.shape().n();
        let mut children: std::collections::BTreeMap<Vec<u64>, usize> = Default::default();
        for leaf in b.iter() {
            *children.entry(leaf[..n - 1].to_vec()).or_default() += 1;
        }
        prop_assert!(children.values().all(|&c| c as u64 == kp));
        prop_assert!(b.iter().all(|leaf| a.contains(leaf)));
        prop_assert!(parents_bound_holds(a.len(), b.len(), a.shape().k()));
    }

    #[test]
    fn regularization_postconditions(a in leaf_strategy(), num in 1u64..=4, den in 1u64..=4) {
        prop_assume!(num <= den);
        let eps = Ratio::new(num, den);
        let r = regularize(&a, eps).unwrap();
        let checks = check_regularization(&a, &r, eps);
        prop_assert!(checks.all_hold(), "{:?}", checks);
        prop_assert!(r.b.iter().all(|leaf| a.contains(leaf)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn subgroups_and_normal_cosets_triple_exactly(seeds in prop::collection::vec(0usize..648, 1..3), shift in 0usize..648) {
        let g = quotient(&GeneratorSet::sl2_elementary(), 9);
        let h = g.subgroup_closure(&seeds);
        let hv = SubsetView::new(&g, h.clone()).unwrap();
        let hhh = product_set(&product_set(&hv, &hv).unwrap(), &hv).unwrap();
        prop_assert_eq!(hhh.len(), hv.len());
        // Cosets of the normal kernel G[3].
        let kernel = congruence_filter(&g, 1).unwrap().member_positions;
        let coset: Vec<usize> = kernel.iter().map(|&k| g.mul(shift, k)).collect();
        let cv = SubsetView::new(&g, coset).unwrap();
        let ccc = product_set(&product_set(&cv, &cv).unwrap(), &cv).unwrap();
        prop_assert_eq!(ccc.len(), cv.len());
    }

    #[test]
    fn products_grow_monotonically(extra in prop::collection::vec(0usize..120, 0..4)) {
        let g = quotient(&GeneratorSet::sl2_elementary(), 5);
        let mut pos = vec![0usize];
        pos.extend(extra);
        let a = SubsetView::new(&g, pos).unwrap();
        let mut prev = product_power(&a, 1).unwrap();
        for c in 2..6 {
            let cur = product_power(&a, c).unwrap();
            prop_assert!(cur.is_superset_of(prev.positions()));
            prev = cur;
        }
    }
}

fn derivative(f: &[BigInt]) -> Vec<BigInt> {
    f.iter().enumerate().skip(1).map(|(n, c)| c * BigInt::from(n)).collect()
}

fn eval(f: &[BigInt], x: &BigInt) -> BigInt {
    f.iter().rev().fold(BigInt::from(0), |acc, c| acc * x + c)
}

/// Plücker coordinates of the rows by the Leibniz formula.
fn wedge_valuation(x: &[Vec<BigInt>], p: u64) -> Option<u32> {
    let d = x.len();
    let m = x[0].len();
    let perms = permutations(d);
    let mut best: Option<u32> = None;
    for cols in combinations(m, d) {
        let mut coord = BigInt::from(0);
        for (perm, sign) in &perms {
            let mut term = BigInt::from(*sign);
            for (i, &j) in perm.iter().enumerate() {
                term *= &x[i][cols[j]];
            }
            coord += term;
        }
        if coord != BigInt::from(0) {
            let v = valuation(&coord, p).unwrap();
            best = Some(best.map_or(v, |b| b.min(v)));
        }
    }
    best
}

fn permutations(d: usize) -> Vec<(Vec<usize>, i64)> {
    if d == 0 {
        return vec![(Vec::new(), 1)];
    }
    let mut out = Vec::new();
    for (perm, sign) in permutations(d - 1) {
        for pos in 0..=perm.len() {
            let mut q = perm.clone();
            q.insert(pos, d - 1);
            // Inserting at `pos` moves the new largest element past d-1-pos others.
            let s = if (d - 1 - pos).is_multiple_of(2) { sign } else { -sign };
            out.push((q, s));
        }
    }
    out
}

fn matrix_strategy() -> impl Strategy<Value = (Vec<Vec<BigInt>>, u64)> {
    (1usize..=3, 0usize..=2, prop::sample::select(vec![2u64, 3, 5])).prop_flat_map(|(d, extra, p)| {
        let m = d + extra;
        prop::collection::vec(prop::collection::vec(-9i64..=9, m), d)
            .prop_map(move |rows| (rows.iter().map(|r| big(r)).collect(), p))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn minor_norm_matches_wedge((x, p) in matrix_strategy()) {
        let n = max_minor_norm(&x, p, None).unwrap();
        match wedge_valuation(&x, p) {
            Some(v) => prop_assert_eq!(n, MinorNorm::Valuation(v)),
            None => prop_assert_eq!(n, MinorNorm::Zero),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn diagonal_divided_differences(coeffs in prop::collection::vec(-20i64..20, 1..7), a in -30i64..30, i in 0usize..=4) {
        let f = big(&coeffs);
        let a = BigInt::from(a);
        let phi = divided_difference_closed_form(&f, &vec![a.clone(); i + 1]);
        let mut d = f.clone();
        for _ in 0..i {
            d = derivative(&d);
        }
        let fact: BigInt = (1..=i).map(BigInt::from).product();
        prop_assert_eq!(phi * fact, eval(&d, &a));
    }

    #[test]
    fn recursion_matches_closed_form(coeffs in prop::collection::vec(-20i64..20, 1..6), pts in prop::collection::hash_set(0i64..200, 1..5)) {
        let p = 3u64;
        let prec = 12u32;
        let f = big(&coeffs);
        let pts: Vec<BigInt> = pts.into_iter().map(BigInt::from).collect();
        let r = divided_difference(&f, &pts, p, prec).unwrap();
        let exact = divided_difference_closed_form(&f, &pts);
        let m = num_traits::pow(BigInt::from(p), r.prec as usize);
        prop_assert!(r.prec <= prec && r.prec > 0);
        use num_integer::Integer;
        prop_assert_eq!(r.value, exact.mod_floor(&m));
    }

    #[test]
    fn column_difference_keeps_norm(x in prop::collection::vec(prop::collection::vec(-9i64..=9, 4), 2), i in 0usize..3) {
        let p = 3u64;
        let d = x.len();
        let rows: Vec<Vec<BigInt>> = x.iter().map(|r| big(r)).collect();
        let mut shifted = rows.clone();
        for row in &mut shifted {
            row[i + 1] = &row[i + 1] - &row[i];
        }
        let norm = |n: MinorNorm| match n {
            MinorNorm::Valuation(k) => (p as f64).powi(-(k as i32)),
            _ => 0.0,
        };
        let before = norm(max_minor_norm(&rows, p, None).unwrap());
        let after = norm(max_minor_norm(&shifted, p, None).unwrap());
        prop_assert!(after <= (d as f64 + 1.0) * before + 1e-15);
    }

    #[test]
    fn moment_curve_minors(d in 1usize..=3, p in prop::sample::select(vec![3u64, 5]), l in 1u32..3, ts in prop::collection::hash_set(0i64..60, 3)) {
        let ts: Vec<i64> = ts.into_iter().take(d).collect();
        prop_assume!(ts.len() == d);
        let f = AnalyticMap::moment_curve(p, d).unwrap();
        let pl = p.pow(l) as i64;
        let xs: Vec<BigInt> = ts.iter().map(|&t| BigInt::from(t * pl)).collect();
        // Rows f_i', columns x_j.
        let rows: Vec<Vec<BigInt>> = (0..d)
            .map(|i| xs.iter().map(|x| f.partial(0).eval_exact(std::slice::from_ref(x))[i].clone()).collect())
            .collect();
        let v = max_minor_norm(&rows, p, None).unwrap().valuation().unwrap();
        let mut pair_sum = 0u32;
        for a in 0..d {
            for b in a + 1..d {
                pair_sum += valuation(&(&xs[a] - &xs[b]), p).unwrap();
            }
        }
        let fact: BigInt = (1..=d).map(BigInt::from).product();
        let constant = valuation(&fact, p).unwrap();
        prop_assert!(v <= pair_sum + constant);
    }

    #[test]
    fn curve_degrees_are_distinct(exps in prop::collection::btree_set((0u32..3, 0u32..3), 1..6)) {
        let s = 3u32;
        let terms: Vec<(Vec<u32>, Vec<BigInt>)> = exps.iter().enumerate().map(|(j, &(a, b))| {
            (vec![a, b], big(&[(j as i64) + 1]))
        }).collect();
        let f = AnalyticMap::new(5, 2, 1, terms).unwrap();
        let g = curve_reduce(&f, &big(&[0, 0]), s).unwrap();
        prop_assert_eq!(g.terms().count(), f.terms().count());
        let out: std::collections::BTreeMap<u32, BigInt> = g.terms().map(|(e, c)| (e[0], c[0].clone())).collect();
        for (e, c) in f.terms() {
            let scale = num_traits::pow(BigInt::from(5), (e[0] + e[1]) as usize);
            prop_assert_eq!(out.get(&(e[0] + s * e[1])), Some(&(&c[0] * scale)));
        }
    }
}

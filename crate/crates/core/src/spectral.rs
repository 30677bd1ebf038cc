//! Random walks on quotients and spectral gaps of their Cayley graphs.
//!
//! The averaging operator is `(T f)(x) = (1/k) Σ_s f(x·s)` over the generator
//! multiset. It is conjugate (through `x ↦ x^{-1}`) to left convolution by the
//! counting measure, so both have the same spectrum. With this convention
//! `Σ_x P^{(l)}(x) f(x) = (T^l f)(e)` and `T` commutes with the translations
//! `f ↦ f(g·)`.

use std::time::Instant;

use log::{debug, info};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::groupgen::{self, GeneratorSet, Quotient};
use crate::modring::Modulus;

/// Quotients up to this order are solved densely.
pub const DENSE_LIMIT: usize = 4000;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 200_000;
pub const DEFAULT_SEED: u64 = 0xC0FFEE;

/// The generator multiset size and walk length.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WalkSpec {
    pub k: usize,
    pub l: usize,
}

impl WalkSpec {
    pub fn new(k: usize, l: usize) -> Self {
        assert!(k >= 1, "a walk needs at least one generator");
        WalkSpec { k, l }
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.k as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Dense,
    PowerIteration,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Dense => "dense",
            Method::PowerIteration => "power-iteration",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub lambda: f64,
    pub method: Method,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// `T f`.
pub fn apply_operator(g: &Quotient, f: &[f64], out: &mut [f64]) {
    let k = g.num_generators();
    let w = 1.0 / k as f64;
    out.iter_mut().for_each(|x| *x = 0.0);
    for s in 0..k {
        for (o, &t) in out.iter_mut().zip(g.gen_action(s)) {
            *o += f[t as usize];
        }
    }
    out.iter_mut().for_each(|x| *x *= w);
}

/// Distribution of the product of `l` uniform generators.
pub fn walk_distribution(g: &Quotient, l: usize) -> Vec<f64> {
    let n = g.order();
    let k = g.num_generators();
    let w = 1.0 / k as f64;
    let mut cur = vec![0.0; n];
    cur[0] = 1.0;
    let mut next = vec![0.0; n];
    for _ in 0..l {
        next.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..k {
            for (x, &t) in g.gen_action(s).iter().enumerate() {
                next[t as usize] += cur[x] * w;
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Integer matrix `C[x][y] = #{s : x·s = y}`, so `T = C / k`.
pub fn transition_counts(g: &Quotient) -> Vec<u32> {
    let n = g.order();
    let mut c = vec![0u32; n * n];
    for s in 0..g.num_generators() {
        for (x, &y) in g.gen_action(s).iter().enumerate() {
            c[x * n + y as usize] += 1;
        }
    }
    c
}

/// λ by a dense symmetric eigensolve.
///
/// # Panics
/// If the counting matrix is not symmetric, or if eigenvalue 1 is repeated
/// (a disconnected Cayley graph).
pub fn spectral_gap_dense(g: &Quotient) -> SpectralResult {
    let n = g.order();
    if n == 1 {
        return SpectralResult { lambda: 0.0, method: Method::Dense, iterations: 0, residual: 0.0, converged: true };
    }
    let counts = transition_counts(g);
    for x in 0..n {
        for y in x + 1..n {
            assert_eq!(counts[x * n + y], counts[y * n + x], "averaging operator is not symmetric");
        }
    }
    let k = g.num_generators() as f64;
    let m = DMatrix::from_fn(n, n, |r, c| counts[r * n + c] as f64 / k);
    let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    let top = eig
        .iter()
        .enumerate()
        .min_by(|a, b| (1.0 - a.1).abs().total_cmp(&(1.0 - b.1).abs()))
        .map(|(i, _)| i)
        .expect("nonempty spectrum");
    eig.swap_remove(top);
    assert!(
        eig.iter().all(|&e| e < 1.0 - 1e-9),
        "eigenvalue 1 is repeated: the Cayley graph is disconnected"
    );
    let lambda = eig.iter().fold(0.0f64, |acc, e| acc.max(e.abs())).min(1.0);
    SpectralResult { lambda, method: Method::Dense, iterations: 0, residual: 0.0, converged: true }
}

fn subtract_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// λ by power iteration of `T²` on the mean-zero subspace.
pub fn spectral_gap_power(g: &Quotient, tol: f64, max_iter: usize, seed: u64) -> SpectralResult {
    let n = g.order();
    if n == 1 {
        return SpectralResult {
            lambda: 0.0,
            method: Method::PowerIteration,
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    subtract_mean(&mut v);
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut tv = vec![0.0; n];
    let mut ttv = vec![0.0; n];
    let mut theta = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        apply_operator(g, &v, &mut tv);
        apply_operator(g, &tv, &mut ttv);
        subtract_mean(&mut ttv);
        theta = dot(&v, &ttv);
        residual = v
            .iter()
            .zip(&ttv)
            .map(|(a, b)| (b - theta * a).powi(2))
            .sum::<f64>()
            .sqrt();
        let nn = norm(&ttv);
        if nn == 0.0 {
            theta = 0.0;
            residual = 0.0;
            break;
        }
        if residual <= tol {
            break;
        }
        v.iter_mut().zip(&ttv).for_each(|(a, b)| *a = b / nn);
    }
    let lambda = theta.max(0.0).sqrt().min(1.0);
    // ⟨v, T v⟩ tells which of ±λ dominates the converged vector.
    apply_operator(g, &v, &mut tv);
    let rayleigh = dot(&v, &tv);
    debug!("power iteration: |G|={n} lambda={lambda} <v,Tv>={rayleigh} after {iterations} steps");
    debug_assert!(rayleigh.abs() <= lambda + 1e-6);
    SpectralResult {
        lambda,
        method: Method::PowerIteration,
        iterations,
        residual,
        converged: residual <= tol,
    }
}

/// Dense below [`DENSE_LIMIT`] elements, power iteration above.
pub fn spectral_gap(g: &Quotient, tol: f64, max_iter: usize) -> SpectralResult {
    spectral_gap_seeded(g, tol, max_iter, DEFAULT_SEED)
}

pub fn spectral_gap_seeded(g: &Quotient, tol: f64, max_iter: usize, seed: u64) -> SpectralResult {
    if g.order() <= DENSE_LIMIT {
        spectral_gap_dense(g)
    } else {
        spectral_gap_power(g, tol, max_iter, seed)
    }
}

#[derive(Clone, Debug)]
pub struct SurveyOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub max_order: usize,
    pub jobs: usize,
}

impl Default for SurveyOptions {
    fn default() -> Self {
        SurveyOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            seed: DEFAULT_SEED,
            max_order: groupgen::default_max_order(),
            jobs: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurveyRow {
    pub q: String,
    pub order: Option<usize>,
    pub lambda: Option<f64>,
    pub method: Option<Method>,
    pub iterations: Option<usize>,
    pub converged: bool,
    pub seconds: f64,
    pub error: Option<String>,
}

impl SurveyRow {
    /// Soft failure: the row carries an error or an unconverged eigenvalue.
    pub fn failed(&self) -> bool {
        self.error.is_some() || !self.converged
    }
}

fn survey_row(omega: &GeneratorSet, q: &Modulus, opts: &SurveyOptions) -> SurveyRow {
    let start = Instant::now();
    let mut row = SurveyRow {
        q: q.to_string(),
        order: None,
        lambda: None,
        method: None,
        iterations: None,
        converged: false,
        seconds: 0.0,
        error: None,
    };
    match groupgen::enumerate_quotient(omega, q, opts.max_order) {
        Ok(g) => {
            let r = spectral_gap_seeded(&g, opts.tol, opts.max_iter, opts.seed);
            row.order = Some(g.order());
            row.lambda = Some(r.lambda);
            row.method = Some(r.method);
            row.iterations = Some(r.iterations);
            row.converged = r.converged;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row.seconds = start.elapsed().as_secs_f64();
    info!("survey q={} order={:?} lambda={:?} in {:.3}s", row.q, row.order, row.lambda, row.seconds);
    row
}

/// One row per modulus, in input order. Rows are computed on `opts.jobs`
/// threads.
pub fn expander_survey(omega: &GeneratorSet, moduli: &[Modulus], opts: &SurveyOptions) -> Vec<SurveyRow> {
    let jobs = opts.jobs.max(1).min(moduli.len().max(1));
    if jobs == 1 {
        return moduli.iter().map(|q| survey_row(omega, q, opts)).collect();
    }
    let mut rows: Vec<Option<SurveyRow>> = vec![None; moduli.len()];
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results = std::sync::Mutex::new(&mut rows);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= moduli.len() {
                    break;
                }
                let row = survey_row(omega, &moduli[i], opts);
                results.lock().expect("survey worker panicked")[i] = Some(row);
            });
        }
    });
    rows.into_iter().map(|r| r.expect("every row computed")).collect()
}

pub const SURVEY_CSV_HEADER: &str = "q,order,lambda,method,iterations,seconds";

/// CSV rendering. The `seconds` column is left empty unless `timings` is
/// set, which keeps repeated runs byte-identical.
pub fn survey_csv(rows: &[SurveyRow], timings: bool) -> String {
    let mut out = String::from(SURVEY_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let opt = |x: Option<String>| x.unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.q,
            opt(r.order.map(|o| o.to_string())),
            opt(r.lambda.map(|l| format!("{l:.12}"))),
            opt(r.method.map(|m| m.as_str().to_string())),
            opt(r.iterations.map(|i| i.to_string())),
            if timings { format!("{:.6}", r.seconds) } else { String::new() },
        ));
    }
    out
}

/// JSON rendering with the same fields as the CSV, plus `error`.
pub fn survey_json(rows: &[SurveyRow], timings: bool) -> serde_json::Value {
    let items = rows
        .iter()
        .map(|r| {
            serde_json::json!({
                "q": r.q,
                "order": r.order,
                "lambda": r.lambda,
                "method": r.method.map(|m| m.as_str()),
                "iterations": r.iterations,
                "seconds": if timings { Some(r.seconds) } else { None },
                "error": r.error,
            })
        })
        .collect();
    serde_json::Value::Array(items)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquidistributionReport {
    pub lhs: f64,
    pub rhs: f64,
    pub orbit_size: usize,
    pub pass: bool,
}

/// Size of the orbit of `f` under `(f·g)(x) = f(g x)`, i.e. `|G| / |P|` with
/// `P = {g : f(g x) = f(x) for all x}`.
pub fn translation_orbit_size(g: &Quotient, f: &[f64]) -> usize {
    let n = g.order();
    let stabilizer = (0..n)
        .filter(|&h| (0..n).all(|x| f[g.mul(h, x)] == f[x]))
        .count();
    n / stabilizer
}

/// Evaluates `|Σ P^{(l)} f − mean f| ≤ ‖f − mean f‖₂ √|f·G| λ^l` with the
/// probability Haar measure in the norm.
pub fn equidistribution_check(g: &Quotient, f: &[f64], l: usize, lambda: f64) -> EquidistributionReport {
    assert_eq!(f.len(), g.order(), "function must be defined on every element");
    let n = g.order() as f64;
    let mean = f.iter().sum::<f64>() / n;
    let p = walk_distribution(g, l);
    let lhs = (dot(&p, f) - mean).abs();
    let centered = (f.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let orbit_size = translation_orbit_size(g, f);
    let rhs = centered * (orbit_size as f64).sqrt() * lambda.powi(l as i32);
    EquidistributionReport { lhs, rhs, orbit_size, pass: lhs <= rhs + 1e-9 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modring::{Modulus, ResidueMatrix};

    fn unipotent_mod(q: u64) -> Quotient {
        groupgen::enumerate_quotient(&GeneratorSet::unipotent(), &Modulus::from_u64(q).unwrap(), 1000).unwrap()
    }

    fn sl2(q: u64) -> Quotient {
        groupgen::enumerate_quotient(&GeneratorSet::sl2_elementary(), &Modulus::from_u64(q).unwrap(), 100_000)
            .unwrap()
    }

    /// Z/4 realized as [[1,a],[0,1]] with a in {1,2,3}.
    fn z4_three_generators() -> Quotient {
        let q = Modulus::from_u64(4).unwrap();
        let gens = (1..4)
            .map(|a| ResidueMatrix::from_i64(2, &[1, a, 0, 1], &q).unwrap())
            .collect();
        Quotient::from_residues(&q, gens, 10).unwrap()
    }

    #[test]
    fn walk_examples() {
        let z5 = unipotent_mod(5);
        let p0 = walk_distribution(&z5, 0);
        assert_eq!(p0[0], 1.0);
        let p2 = walk_distribution(&z5, 2);
        let by_shift = |a: u64| p2[z5.position(&[1, a, 0, 1]).unwrap()];
        assert!((by_shift(0) - 0.5).abs() < 1e-15);
        assert!((by_shift(2) - 0.25).abs() < 1e-15);
        assert!((by_shift(3) - 0.25).abs() < 1e-15);
        assert_eq!(by_shift(1), 0.0);

        let g = sl2(3);
        let p1 = walk_distribution(&g, 1);
        for pos in g.generator_positions() {
            assert!((p1[pos] - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn gap_examples() {
        let r = spectral_gap(&unipotent_mod(5), DEFAULT_TOL, DEFAULT_MAX_ITER);
        assert!((r.lambda - (4.0 * std::f64::consts::PI / 5.0).cos().abs()).abs() < 1e-12);
        let r = spectral_gap(&z4_three_generators(), DEFAULT_TOL, DEFAULT_MAX_ITER);
        assert!((r.lambda - 1.0 / 3.0).abs() < 1e-12);
        let trivial =
            groupgen::enumerate_quotient(&GeneratorSet::sl2_elementary(), &Modulus::one(), 10).unwrap();
        assert_eq!(spectral_gap(&trivial, DEFAULT_TOL, 10).lambda, 0.0);
        // Even cycles are bipartite.
        let r = spectral_gap(&unipotent_mod(6), DEFAULT_TOL, DEFAULT_MAX_ITER);
        assert!((r.lambda - 1.0).abs() < 1e-9);
    }

    #[test]
    fn power_iteration_on_cycle() {
        let z = unipotent_mod(101);
        let r = spectral_gap_power(&z, 1e-10, 1_000_000, DEFAULT_SEED);
        let want = (100.0 * std::f64::consts::PI / 101.0).cos().abs();
        assert!(r.converged);
        assert!((r.lambda - want).abs() < 1e-9, "{} vs {want}", r.lambda);
    }

    #[test]
    fn dense_and_power_agree() {
        for q in [5, 7, 9] {
            let g = sl2(q);
            let d = spectral_gap_dense(&g);
            let p = spectral_gap_power(&g, 1e-10, DEFAULT_MAX_ITER, DEFAULT_SEED);
            assert!((d.lambda - p.lambda).abs() < 1e-7, "q={q}: {} vs {}", d.lambda, p.lambda);
        }
    }

    #[test]
    fn operator_is_symmetric() {
        let g = sl2(5);
        let c = transition_counts(&g);
        let n = g.order();
        for x in 0..n {
            for y in 0..n {
                assert_eq!(c[x * n + y], c[y * n + x]);
            }
        }
    }

    #[test]
    fn equidistribution_examples() {
        let z5 = unipotent_mod(5);
        let lam = spectral_gap(&z5, DEFAULT_TOL, DEFAULT_MAX_ITER).lambda;
        let r = equidistribution_check(&z5, &[2.0; 5], 4, lam);
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(r.pass);
        let mut ind = vec![0.0; 5];
        ind[0] = 1.0;
        let r = equidistribution_check(&z5, &ind, 3, lam);
        assert!(r.pass && r.lhs > 0.0);
        assert_eq!(r.orbit_size, 5);
    }

    #[test]
    fn orbit_of_invariant_function() {
        // A function of the top-right entry mod 3 on Z/9 has orbit size 3.
        let z9 = unipotent_mod(9);
        let f: Vec<f64> = (0..9).map(|i| (z9.element(i)[1] % 3) as f64).collect();
        assert_eq!(translation_orbit_size(&z9, &f), 3);
    }

    #[test]
    fn survey_rows_and_csv() {
        let moduli: Vec<Modulus> = [3u64, 5, 7].iter().map(|&q| Modulus::from_u64(q).unwrap()).collect();
        let opts = SurveyOptions::default();
        let rows = expander_survey(&GeneratorSet::sl2_elementary(), &moduli, &opts);
        let orders: Vec<_> = rows.iter().map(|r| r.order.unwrap()).collect();
        assert_eq!(orders, vec![24, 120, 336]);
        let parallel = expander_survey(&GeneratorSet::sl2_elementary(), &moduli, &SurveyOptions { jobs: 3, ..opts.clone() });
        assert_eq!(survey_csv(&rows, false), survey_csv(&parallel, false));
        assert!(survey_csv(&rows, false).starts_with(SURVEY_CSV_HEADER));
        assert!(expander_survey(&GeneratorSet::sl2_elementary(), &[], &opts).is_empty());
        let small = SurveyOptions { max_order: 30, ..opts };
        let rows = expander_survey(&GeneratorSet::sl2_elementary(), &moduli, &small);
        assert!(rows[0].error.is_none() && rows[1].failed());
    }
}

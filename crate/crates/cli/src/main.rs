//! Command-line experiment runner.
//!
//! Exit status: 0 on success, 1 when some rows fail softly, 2 on invalid
//! configuration or unreadable input.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::Ratio;
use serde::Deserialize;
use serde_json::{json, Value};

use superapprox::approxsub::{self, SubsetView};
use superapprox::groupgen::{self, GeneratorSet, Quotient};
use superapprox::modring::{Modulus, ResidueMatrix};
use superapprox::padic::{self, AnalyticMap, TruncatedPoint};
use superapprox::spectral::{self, SurveyOptions, SurveyRow};
use superapprox::treereg::{self, LeafSet};

#[derive(Parser, Debug)]
#[command(name = "superapprox", version, about = "Expansion and approximate-subgroup experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectral gap of SL-type quotients over a list of moduli.
    Survey(SurveyArgs),
    /// Spectral gap of a single quotient.
    Gap(GapArgs),
    /// Enumerate a quotient and optionally export its Cayley graph.
    Quotient(QuotientArgs),
    /// Regularize a set of tree leaves.
    Regularize(RegularizeArgs),
    /// Approximate-subgroup predicate and tripling statistics of a subset.
    Tripling(TriplingArgs),
    /// Least number of products of a subset covering a congruence kernel.
    Boundedgen(BoundedGenArgs),
    /// Commutator width of the derived subgroup.
    Commfill(CommFillArgs),
    /// Hensel lifting for a polynomial map.
    Hensel(HenselArgs),
    /// Exhaustive open-image coverage of iterated sumsets.
    Sumset(SumsetArgs),
    /// Weighted equidistribution of random walks against random functions.
    Equidist(EquidistArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct Output {
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct GroupInput {
    /// Generator set as JSON: {"q0", "dimension", "denominator_exponents", "matrices"}.
    #[arg(long)]
    gens: PathBuf,
    /// Modulus, either an integer or a factorization such as 3^2*5.
    #[arg(long)]
    modulus: String,
}

#[derive(Args, Debug)]
struct SurveyArgs {
    #[arg(long)]
    gens: PathBuf,
    /// Comma-separated moduli.
    #[arg(long)]
    moduli: String,
    #[arg(long, default_value_t = spectral::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = spectral::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = spectral::DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Fill the seconds column; output is then no longer reproducible.
    #[arg(long)]
    timings: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct GapArgs {
    #[command(flatten)]
    group: GroupInput,
    #[arg(long, default_value_t = spectral::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = spectral::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = spectral::DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long)]
    timings: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct QuotientArgs {
    #[command(flatten)]
    group: GroupInput,
    /// Write the Cayley graph as "u v gen_index" lines to this file.
    #[arg(long)]
    edges: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct RegularizeArgs {
    /// Leaves as text: header "k=<k> n=<n>", then one comma-separated leaf per line.
    #[arg(long)]
    leaves: PathBuf,
    /// Exact rational a/b in (0, 1].
    #[arg(long)]
    epsilon: String,
    /// Regularize on the block tree of size-s blocks instead.
    #[arg(long)]
    block: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct TriplingArgs {
    #[command(flatten)]
    group: GroupInput,
    /// Subset as JSON {"positions": [...]} or {"matrices": [...]}; the
    /// generators together with the identity when omitted.
    #[arg(long)]
    subset: Option<PathBuf>,
    /// Exact rational a/b.
    #[arg(long)]
    delta: String,
    #[arg(long = "walk-length")]
    walk_length: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct BoundedGenArgs {
    #[command(flatten)]
    group: GroupInput,
    #[arg(long)]
    subset: Option<PathBuf>,
    /// Largest number of products tried.
    #[arg(long = "C")]
    c: usize,
    #[arg(long)]
    level: u32,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct CommFillArgs {
    #[command(flatten)]
    group: GroupInput,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct HenselArgs {
    /// Polynomial map as JSON: {"p", "n0", "d0", "terms": [{"exps", "coeffs"}]}.
    #[arg(long)]
    map: PathBuf,
    /// Comma-separated base point.
    #[arg(long)]
    point: String,
    /// Comma-separated target direction y.
    #[arg(long)]
    target: String,
    #[arg(long)]
    l: u32,
    /// Defaults to the valuation of N(dF(x0)).
    #[arg(long)]
    k0: Option<u32>,
    /// Working precision M.
    #[arg(long)]
    precision: u32,
    #[arg(long, default_value_t = padic::DEFAULT_MARGIN)]
    margin: u32,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct SumsetArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    l: u32,
    #[arg(long = "C")]
    c: usize,
    #[arg(long)]
    precision: u32,
    /// Also run the sorted-difference path and compare.
    #[arg(long)]
    verify: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct EquidistArgs {
    #[command(flatten)]
    group: GroupInput,
    #[arg(long = "walk-length")]
    walk_length: usize,
    /// Number of random functions.
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long, default_value_t = spectral::DEFAULT_SEED)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Config(anyhow::Error),
    Soft,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn emit(output: &Output, text: &str) -> anyhow::Result<()> {
    match &output.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(output: &Output, value: &Value) -> anyhow::Result<()> {
    if output.format == Some(Format::Csv) {
        bail!("this command only writes JSON");
    }
    emit(output, &format!("{}\n", serde_json::to_string_pretty(value)?))
}

fn parse_ratio(s: &str, what: &str) -> anyhow::Result<Ratio<u64>> {
    let (a, b) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (s.trim(), "1"),
    };
    let a: u64 = a.parse().with_context(|| format!("{what} numerator {a:?}"))?;
    let b: u64 = b.parse().with_context(|| format!("{what} denominator {b:?}"))?;
    if b == 0 {
        bail!("{what} has a zero denominator");
    }
    Ok(Ratio::new(a, b))
}

fn parse_ints(s: &str, what: &str) -> anyhow::Result<Vec<BigInt>> {
    s.split(',')
        .map(|x| BigInt::from_str(x.trim()).with_context(|| format!("{what} entry {x:?}")))
        .collect()
}

fn load_gens(path: &Path) -> anyhow::Result<GeneratorSet> {
    GeneratorSet::from_json(&read(path)?).with_context(|| format!("invalid generator set {}", path.display()))
}

fn load_map(path: &Path) -> anyhow::Result<AnalyticMap> {
    AnalyticMap::from_json(&read(path)?).with_context(|| format!("invalid map {}", path.display()))
}

fn parse_modulus(s: &str) -> anyhow::Result<Modulus> {
    Modulus::from_str(s.trim()).map_err(|e| anyhow!("modulus {s:?}: {e}"))
}

fn build_quotient(group: &GroupInput) -> anyhow::Result<Quotient> {
    let gens = load_gens(&group.gens)?;
    let q = parse_modulus(&group.modulus)?;
    Ok(groupgen::enumerate_quotient(&gens, &q, groupgen::default_max_order())?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubsetDocument {
    #[serde(default)]
    positions: Option<Vec<usize>>,
    #[serde(default)]
    matrices: Option<Vec<Vec<Vec<i64>>>>,
}

fn load_subset<'a>(g: &'a Quotient, path: Option<&Path>) -> anyhow::Result<SubsetView<'a>> {
    let Some(path) = path else {
        return Ok(SubsetView::generators_with_identity(g));
    };
    let doc: SubsetDocument =
        serde_json::from_str(&read(path)?).with_context(|| format!("invalid subset {}", path.display()))?;
    match (doc.positions, doc.matrices) {
        (Some(pos), None) => Ok(SubsetView::new(g, pos)?),
        (None, Some(mats)) => {
            let residues = mats
                .iter()
                .map(|m| ResidueMatrix::from_i64(g.dim(), &m.concat(), g.modulus()))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(SubsetView::from_matrices(g, &residues)?)
        }
        _ => bail!("subset needs exactly one of \"positions\" or \"matrices\""),
    }
}

fn write_rows(output: &Output, rows: &[SurveyRow], timings: bool) -> Outcome {
    let text = match output.format.unwrap_or(Format::Csv) {
        Format::Csv => spectral::survey_csv(rows, timings),
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&spectral::survey_json(rows, timings)).map_err(anyhow::Error::from)?),
    };
    emit(output, &text)?;
    if rows.iter().any(SurveyRow::failed) {
        return Err(Failure::Soft);
    }
    Ok(())
}

fn check_tol(tol: f64) -> anyhow::Result<()> {
    if !(tol > 0.0 && tol < 1.0) {
        bail!("tolerance must lie in (0, 1)");
    }
    Ok(())
}

fn survey(args: &SurveyArgs) -> Outcome {
    check_tol(args.tol)?;
    if args.jobs == 0 {
        return Err(anyhow!("--jobs must be at least 1").into());
    }
    let gens = load_gens(&args.gens)?;
    let moduli = args
        .moduli
        .split(',')
        .map(parse_modulus)
        .collect::<anyhow::Result<Vec<_>>>()?;
    let opts = SurveyOptions { tol: args.tol, max_iter: args.max_iter, seed: args.seed, jobs: args.jobs, ..Default::default() };
    let rows = spectral::expander_survey(&gens, &moduli, &opts);
    write_rows(&args.output, &rows, args.timings)
}

fn gap(args: &GapArgs) -> Outcome {
    check_tol(args.tol)?;
    let gens = load_gens(&args.group.gens)?;
    let q = parse_modulus(&args.group.modulus)?;
    let opts = SurveyOptions { tol: args.tol, max_iter: args.max_iter, seed: args.seed, ..Default::default() };
    let rows = spectral::expander_survey(&gens, &[q], &opts);
    write_rows(&args.output, &rows, args.timings)
}

fn quotient(args: &QuotientArgs) -> Outcome {
    let g = build_quotient(&args.group)?;
    let graph = groupgen::cayley_graph(&g);
    if let Some(path) = &args.edges {
        std::fs::write(path, graph.to_edge_list()).with_context(|| format!("cannot write {}", path.display()))?;
    }
    let (p, n) = g.prime_power().map(|(p, n)| (Some(p), Some(n))).unwrap_or((None, None));
    let kernel_sizes: Vec<usize> = match n {
        Some(n) => (0..=n).map(|m| groupgen::congruence_filter(&g, m).map(|k| k.len())).collect::<Result<_, _>>().map_err(anyhow::Error::from)?,
        None => Vec::new(),
    };
    match args.output.format.unwrap_or(Format::Json) {
        Format::Csv => emit(
            &args.output,
            &format!("q,order,generators,edges\n{},{},{},{}\n", g.modulus(), g.order(), graph.degree(), graph.undirected_edge_count()),
        )?,
        Format::Json => emit_json(
            &args.output,
            &json!({
                "q": g.modulus().to_string(),
                "order": g.order(),
                "generators": graph.degree(),
                "edges": graph.undirected_edge_count(),
                "prime": p,
                "exponent": n,
                "kernel_sizes": kernel_sizes,
            }),
        )?,
    }
    Ok(())
}

fn digits(v: &[num_bigint::BigUint]) -> Vec<String> {
    v.iter().map(|d| d.to_string()).collect()
}

fn regularize(args: &RegularizeArgs) -> Outcome {
    let eps = parse_ratio(&args.epsilon, "epsilon")?;
    let a = LeafSet::from_text(&read(&args.leaves)?).context("invalid leaf set")?;
    let value = if args.block {
        let r = treereg::block_regularize(&a, eps).map_err(anyhow::Error::from)?;
        json!({
            "epsilon": eps.to_string(),
            "s": r.s,
            "log2_k_eps": r.log2_k_eps,
            "block_depth": r.block_depth,
            "m": r.m,
            "v": digits(&r.v),
            "size": r.b.len(),
            "input_size": a.len(),
        })
    } else {
        let r = treereg::regularize(&a, eps).map_err(anyhow::Error::from)?;
        let checks = treereg::check_regularization(&a, &r, eps);
        json!({
            "epsilon": eps.to_string(),
            "m": r.m,
            "v": digits(&r.v),
            "degrees": r.degrees,
            "size": r.b.len(),
            "input_size": a.len(),
            "chain_degrees": r.chain_degrees,
            "chain_sizes": r.chain_sizes,
            "checks": checks,
        })
    };
    emit_json(&args.output, &value)?;
    Ok(())
}

fn tripling(args: &TriplingArgs) -> Outcome {
    let delta = parse_ratio(&args.delta, "delta")?;
    let g = build_quotient(&args.group)?;
    let a = load_subset(&g, args.subset.as_deref())?;
    let report = approxsub::pq_predicate(&a, delta, args.walk_length).map_err(anyhow::Error::from)?;
    let stats = approxsub::approx_stats(&a).map_err(anyhow::Error::from)?;
    emit_json(
        &args.output,
        &json!({ "q": g.modulus().to_string(), "delta": delta.to_string(), "walk_length": args.walk_length, "predicate": report, "stats": stats }),
    )?;
    Ok(())
}

fn boundedgen(args: &BoundedGenArgs) -> Outcome {
    let g = build_quotient(&args.group)?;
    let a = load_subset(&g, args.subset.as_deref())?;
    let minimal = approxsub::minimal_bounded_gen(&a, args.level, args.c).map_err(anyhow::Error::from)?;
    let kernel = groupgen::congruence_filter(&g, args.level).map_err(anyhow::Error::from)?;
    emit_json(
        &args.output,
        &json!({
            "q": g.modulus().to_string(),
            "level": args.level,
            "subset_size": a.len(),
            "kernel_size": kernel.len(),
            "c_max": args.c,
            "holds": minimal.is_some(),
            "minimal_c": minimal,
        }),
    )?;
    if minimal.is_none() {
        return Err(Failure::Soft);
    }
    Ok(())
}

fn commfill(args: &CommFillArgs) -> Outcome {
    let g = build_quotient(&args.group)?;
    let fill = approxsub::commutator_fill(&g).map_err(anyhow::Error::from)?;
    emit_json(&args.output, &json!({ "q": g.modulus().to_string(), "fill": fill }))?;
    Ok(())
}

fn hensel(args: &HenselArgs) -> Outcome {
    let f = load_map(&args.map)?;
    let point = parse_ints(&args.point, "point")?;
    let y = parse_ints(&args.target, "target")?;
    if point.len() != f.n0() {
        return Err(anyhow!("point has {} coordinates, the map takes {}", point.len(), f.n0()).into());
    }
    let x0 = TruncatedPoint::new(f.p(), args.precision, point).map_err(anyhow::Error::from)?;
    let norm = padic::max_minor_norm(&padic::jacobian(&f, &x0), f.p(), Some(args.precision)).map_err(anyhow::Error::from)?;
    let k0 = match (args.k0, norm.valuation()) {
        (Some(k), _) => k,
        (None, Some(v)) => v,
        (None, None) => return Err(anyhow!("N(dF(x0)) vanishes at precision {}", args.precision).into()),
    };
    let r = padic::hensel_solve(&f, &x0, &y, args.l, k0, args.margin).map_err(anyhow::Error::from)?;
    let trace: Vec<Value> = r.trace.iter().map(|t| json!({ "predicted": t.predicted, "observed": t.observed })).collect();
    emit_json(
        &args.output,
        &json!({
            "p": f.p(),
            "precision": args.precision,
            "l": args.l,
            "k0": k0,
            "norm": norm,
            "x": r.x.coords.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            "trace": trace,
        }),
    )?;
    Ok(())
}

fn sumset(args: &SumsetArgs) -> Outcome {
    let f = load_map(&args.map)?;
    let cov = padic::sumset_coverage(&f, args.l, args.c, args.precision).map_err(anyhow::Error::from)?;
    let agree = if args.verify {
        let a = padic::sumset_by_bitset(&f, args.l, args.c, args.precision).map_err(anyhow::Error::from)?;
        let b = padic::sumset_by_sorted_differences(&f, args.l, args.c, args.precision).map_err(anyhow::Error::from)?;
        Some(a == b)
    } else {
        None
    };
    emit_json(
        &args.output,
        &json!({
            "p": f.p(),
            "l": args.l,
            "C": args.c,
            "precision": args.precision,
            "e": cov.e,
            "covered": cov.e.is_some(),
            "image_size": cov.image_size,
            "sumset_size": cov.sumset_size,
            "span_rank": cov.span_rank,
            "paths_agree": agree,
        }),
    )?;
    if cov.e.is_none() || agree == Some(false) {
        return Err(Failure::Soft);
    }
    Ok(())
}

fn equidist(args: &EquidistArgs) -> Outcome {
    use rand::{Rng, SeedableRng};
    let g = build_quotient(&args.group)?;
    let lambda = spectral::spectral_gap_seeded(&g, spectral::DEFAULT_TOL, spectral::DEFAULT_MAX_ITER, args.seed).lambda;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let mut rows = Vec::with_capacity(args.samples);
    for sample in 0..args.samples {
        let f: Vec<f64> = (0..g.order()).map(|_| rng.random_range(-1.0..1.0)).collect();
        rows.push((sample, spectral::equidistribution_check(&g, &f, args.walk_length, lambda)));
    }
    let text = match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut out = String::from("sample,walk_length,lhs,rhs,orbit_size,pass\n");
            for (s, r) in &rows {
                out.push_str(&format!("{s},{},{:.12e},{:.12e},{},{}\n", args.walk_length, r.lhs, r.rhs, r.orbit_size, r.pass));
            }
            out
        }
        Format::Json => {
            let items: Vec<Value> = rows
                .iter()
                .map(|(s, r)| json!({ "sample": s, "walk_length": args.walk_length, "lhs": r.lhs, "rhs": r.rhs, "orbit_size": r.orbit_size, "pass": r.pass }))
                .collect();
            format!("{}\n", serde_json::to_string_pretty(&json!({ "q": g.modulus().to_string(), "lambda": lambda, "rows": items })).map_err(anyhow::Error::from)?)
        }
    };
    emit(&args.output, &text)?;
    if rows.iter().any(|(_, r)| !r.pass) {
        return Err(Failure::Soft);
    }
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Survey(a) => survey(a),
        Command::Gap(a) => gap(a),
        Command::Quotient(a) => quotient(a),
        Command::Regularize(a) => regularize(a),
        Command::Tripling(a) => tripling(a),
        Command::Boundedgen(a) => boundedgen(a),
        Command::Commfill(a) => commfill(a),
        Command::Hensel(a) => hensel(a),
        Command::Sumset(a) => sumset(a),
        Command::Equidist(a) => equidist(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Soft) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

//! Command-line front end for the `wbary` library: ingestion, candidate
//! construction, solving, evaluation, rendering, and the experiment
//! suites.
//!
//! Every command prints one machine-readable JSON summary line on standard
//! output and human-readable detail on standard error. Exit codes: 0 for a
//! completed (optimal) run, 2 when a resource limit stopped the solve
//! early with a feasible incumbent, 1 for any error. Output files never
//! contain wall-clock times, so identical command lines over identical
//! inputs reproduce them byte for byte.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use wbary::bench::{
    run_ellipse_pipeline, run_ratio_suite, EllipseConfig, SuiteCell, SuiteConfig, WeightKind,
};
use wbary::candidates::{
    build_exact_support, build_s1_enum, build_s1_sample, build_s2_enum, build_s2_sample,
    hybrid_expand, CandidateSupport,
};
use wbary::io::{
    ingest_grayscale, ingest_rgb, read_instance, read_intensity_grid, read_measure,
    read_rgb_image, write_measure_with_meta, write_render, RenderMode,
};
use wbary::oracle::{ratio_bound, solve_exact, WeightRegime};
use wbary::solver::{solve_barycenter, BarycenterSolution, SolveLimits, SolveMode};
use wbary::transport::{eval_objective, w2_squared};
use wbary::{BarycenterInstance, DiscreteMeasure};

const EXIT_OK: i32 = 0;
const EXIT_ERROR: i32 = 1;
const EXIT_EARLY_STOP: i32 = 2;

/// Relative tolerance of the always-on self-audit that recomputes every
/// reported objective value from the recovered measure.
const AUDIT_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "wbary",
    version,
    about = "Discrete 2-Wasserstein barycenters over reduced candidate supports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Approximate barycenter over a reduced candidate support.
    Barycenter(BarycenterArgs),
    /// Exact barycenter via full support enumeration (guarded).
    Exact(ExactArgs),
    /// Squared 2-Wasserstein distance between two measures.
    Distance(DistanceArgs),
    /// Nearest-barycenter classification of test measures.
    Classify(ClassifyArgs),
    /// Rasterize a measure to a binary PGM or PPM image.
    Render(RenderArgs),
    /// Experiment suites.
    #[command(subcommand)]
    Bench(BenchCommand),
}

/// Measure inputs shared by the solve commands. A single `.json` input may
/// be an instance file (measures plus weights); otherwise each input is
/// loaded as one measure: `.json` measure files, `.pgm`/`.csv` grayscale
/// grids, `.ppm` color images.
#[derive(Args)]
struct InputArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Barycenter weights, comma-separated; default equal.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Per-coordinate scale applied to every loaded atom.
    #[arg(long, value_delimiter = ',')]
    scale: Option<Vec<f64>>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    /// Means of t-fold index draws from the weight law.
    S1Sample,
    /// Means of all size-t index multisets.
    S1Enum,
    /// Mean of one uniform size-t index subset.
    S2Sample,
    /// Means of all size-t index subsets.
    S2Enum,
    /// The provably sufficient full tuple-mean support.
    UnionExact,
    /// s1-enum base solve, then neighborhood expansion and a re-solve.
    Hybrid,
}

impl Algorithm {
    fn needs_seed(self) -> bool {
        matches!(self, Algorithm::S1Sample | Algorithm::S2Sample)
    }

    fn name(self) -> &'static str {
        match self {
            Algorithm::S1Sample => "s1-sample",
            Algorithm::S1Enum => "s1-enum",
            Algorithm::S2Sample => "s2-sample",
            Algorithm::S2Enum => "s2-enum",
            Algorithm::UnionExact => "union-exact",
            Algorithm::Hybrid => "hybrid",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Auto,
    Colgen,
    Compact,
}

impl From<ModeArg> for SolveMode {
    fn from(mode: ModeArg) -> SolveMode {
        match mode {
            ModeArg::Auto => SolveMode::Auto,
            ModeArg::Colgen => SolveMode::Colgen,
            ModeArg::Compact => SolveMode::Compact,
        }
    }
}

#[derive(Args)]
struct LimitArgs {
    /// Wall-clock budget in seconds, checked between pricing rounds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Cap on separation-oracle pricing rounds.
    #[arg(long)]
    max_rounds: Option<usize>,
    /// Simplex pivot budget per LP solve.
    #[arg(long, default_value_t = SolveLimits::default().pivot_limit)]
    pivot_limit: usize,
}

impl LimitArgs {
    fn to_limits(&self) -> SolveLimits {
        SolveLimits {
            time_limit: self.time_limit.map(Duration::from_secs_f64),
            max_pricing_rounds: self.max_rounds,
            pivot_limit: self.pivot_limit,
            ..SolveLimits::default()
        }
    }
}

#[derive(Args)]
struct BarycenterArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Candidate-support family.
    #[arg(long, value_enum)]
    algorithm: Algorithm,
    /// Support size parameter t.
    #[arg(long, default_value_t = 1)]
    t: usize,
    /// RNG seed; required by the sampling families.
    #[arg(long)]
    seed: Option<u64>,
    /// Solver route.
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    mode: ModeArg,
    #[command(flatten)]
    limits: LimitArgs,
    /// Neighborhood size for --algorithm hybrid.
    #[arg(long, default_value_t = 5)]
    neighbors: usize,
    /// Write the barycenter measure here (.json).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Render the barycenter here (PGM for planar, PPM for color measures).
    #[arg(long)]
    render: Option<PathBuf>,
    /// Render grid side length.
    #[arg(long, default_value_t = 20)]
    grid: usize,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    limits: LimitArgs,
    /// Write the exact barycenter measure here (.json).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Render the exact barycenter here.
    #[arg(long)]
    render: Option<PathBuf>,
    /// Render grid side length.
    #[arg(long, default_value_t = 20)]
    grid: usize,
}

#[derive(Args)]
struct DistanceArgs {
    a: PathBuf,
    b: PathBuf,
    /// Per-coordinate scale applied to every loaded atom.
    #[arg(long, value_delimiter = ',')]
    scale: Option<Vec<f64>>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Class barycenter measure file; repeat for each class (at least two).
    #[arg(long = "class")]
    classes: Vec<PathBuf>,
    /// Test measures to assign.
    #[arg(required = true)]
    tests: Vec<PathBuf>,
    /// True class indices of the test measures, comma-separated; enables
    /// accuracy and confusion counts.
    #[arg(long, value_delimiter = ',')]
    labels: Option<Vec<usize>>,
    /// Per-coordinate scale applied to every loaded atom.
    #[arg(long, value_delimiter = ',')]
    scale: Option<Vec<f64>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RenderModeArg {
    Gray,
    Rgb,
}

#[derive(Args)]
struct RenderArgs {
    input: PathBuf,
    /// Output image path.
    #[arg(long)]
    out: PathBuf,
    /// Render grid side length.
    #[arg(long, default_value_t = 20)]
    grid: usize,
    /// Defaults by measure dimension: 2 is gray, 5 is rgb.
    #[arg(long, value_enum)]
    mode: Option<RenderModeArg>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Ratio certification of every family against the exact oracle on
    /// random instances.
    Ratio(RatioArgs),
    /// Nested-ellipse dataset pipeline with renders.
    Ellipse(EllipseArgs),
}

#[derive(Args)]
struct RatioArgs {
    /// Suite cells as k,n,d triples separated by semicolons.
    #[arg(long, default_value = "3,2,2;3,3,2;3,4,2;4,2,2;4,3,2;4,4,2;5,2,2;5,3,2;5,4,2")]
    cells: String,
    #[arg(long, default_value_t = 12)]
    instances: usize,
    /// Support size parameters, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    t: Vec<usize>,
    #[arg(long, value_enum, default_value_t = WeightsArg::Random)]
    weights: WeightsArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sampled families use the exhaustive expectation up to this many
    /// index draws, Monte Carlo beyond it.
    #[arg(long, default_value_t = 10_000)]
    exhaustive_limit: usize,
    /// Monte Carlo repetitions when exhaustive expectation is infeasible.
    #[arg(long, default_value_t = 200)]
    mc_draws: usize,
    /// Write the CSV report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightsArg {
    Equal,
    Random,
}

#[derive(Args)]
struct EllipseArgs {
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 20)]
    grid: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Support size parameters, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    t: Vec<usize>,
    /// Cross-check both solver routes at this t.
    #[arg(long, default_value_t = 1)]
    cross_check_t: usize,
    /// Directory for dataset files, renders, barycenters and the CSV report.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_ERROR,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(EXIT_ERROR);
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Barycenter(args) => cmd_barycenter(args),
        Command::Exact(args) => cmd_exact(args),
        Command::Distance(args) => cmd_distance(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Render(args) => cmd_render(args),
        Command::Bench(BenchCommand::Ratio(args)) => cmd_bench_ratio(args),
        Command::Bench(BenchCommand::Ellipse(args)) => cmd_bench_ellipse(args),
    }
}

fn load_measure(path: &Path, scale: Option<&[f64]>) -> Result<DiscreteMeasure> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let measure = match ext.as_deref() {
        Some("json") => read_measure(path)?,
        Some("pgm") | Some("csv") => ingest_grayscale(&read_intensity_grid(path)?)?,
        Some("ppm") => ingest_rgb(&read_rgb_image(path)?)?,
        _ => bail!(
            "unsupported input {}: expected .json, .pgm, .csv or .ppm",
            path.display()
        ),
    };
    apply_scale(measure, scale).with_context(|| format!("scaling {}", path.display()))
}

fn apply_scale(measure: DiscreteMeasure, scale: Option<&[f64]>) -> Result<DiscreteMeasure> {
    match scale {
        None => Ok(measure),
        Some(s) => Ok(measure.scaled(s)?),
    }
}

/// Loads the solve inputs as one instance. A single `.json` argument is
/// first tried as an instance file; every other shape loads each input as
/// a measure and combines them under `--weights` (default equal).
fn load_instance(args: &InputArgs) -> Result<BarycenterInstance> {
    let scale = args.scale.as_deref();
    if args.inputs.len() == 1
        && args.inputs[0].extension().and_then(|e| e.to_str()) == Some("json")
    {
        let path = &args.inputs[0];
        match read_instance(path) {
            Ok(inst) => {
                if args.weights.is_some() {
                    bail!(
                        "--weights conflicts with instance file {}, which already carries weights",
                        path.display()
                    );
                }
                return match scale {
                    None => Ok(inst),
                    Some(s) => {
                        let measures = inst
                            .measures()
                            .iter()
                            .map(|m| m.scaled(s))
                            .collect::<Result<Vec<_>, _>>()?;
                        Ok(BarycenterInstance::new(measures, inst.weights().to_vec())?)
                    }
                };
            }
            Err(inst_err) => {
                if let Ok(measure) = read_measure(path) {
                    let measure = apply_scale(measure, scale)?;
                    let weights = args.weights.clone().unwrap_or_else(|| vec![1.0]);
                    return Ok(BarycenterInstance::new(vec![measure], weights)?);
                }
                return Err(anyhow!(inst_err))
                    .with_context(|| format!("reading {}", path.display()));
            }
        }
    }
    let measures = args
        .inputs
        .iter()
        .map(|p| load_measure(p, scale))
        .collect::<Result<Vec<_>>>()?;
    match &args.weights {
        Some(w) => Ok(BarycenterInstance::new(measures, w.clone())?),
        None => Ok(BarycenterInstance::equal(measures)?),
    }
}

fn render_mode_for(measure: &DiscreteMeasure) -> Result<RenderMode> {
    match measure.dim() {
        2 => Ok(RenderMode::Gray),
        5 => Ok(RenderMode::Rgb),
        d => bail!("cannot render a {d}-dimensional measure; renderable dimensions are 2 and 5"),
    }
}

/// Always-on self-audit: recomputes the reported objective from the
/// recovered measure with independent transport solves. At optimality the
/// two must agree both ways; an early-stopped master may legitimately
/// exceed the recomputation, so only the safe direction is enforced.
fn audit_value(
    inst: &BarycenterInstance,
    measure: &DiscreteMeasure,
    value: f64,
    optimal: bool,
) -> Result<f64> {
    let audit = eval_objective(inst, measure)?;
    let tol = AUDIT_TOL * (1.0 + value.abs());
    let ok = if optimal {
        (audit - value).abs() <= tol
    } else {
        audit <= value + tol
    };
    if !ok {
        bail!("self-audit failed: reported value {value}, recomputed objective {audit}");
    }
    Ok(audit)
}

fn build_support(
    inst: &BarycenterInstance,
    args: &BarycenterArgs,
    limits: &SolveLimits,
) -> Result<(CandidateSupport, Option<f64>)> {
    let seed = || {
        args.seed.ok_or_else(|| {
            anyhow!(
                "--algorithm {} draws random indices; --seed is required",
                args.algorithm.name()
            )
        })
    };
    if args.seed.is_some() && !args.algorithm.needs_seed() {
        eprintln!("note: --seed is ignored by --algorithm {}", args.algorithm.name());
    }
    let support = match args.algorithm {
        Algorithm::S1Sample => build_s1_sample(inst, args.t, seed()?)?,
        Algorithm::S1Enum => build_s1_enum(inst, args.t)?,
        Algorithm::S2Sample => build_s2_sample(inst, args.t, seed()?)?,
        Algorithm::S2Enum => build_s2_enum(inst, args.t)?,
        Algorithm::UnionExact => build_exact_support(inst)?,
        Algorithm::Hybrid => {
            let base_support = build_s1_enum(inst, args.t)?;
            let base = solve_barycenter(inst, &base_support, args.mode.into(), limits)?;
            let expanded = hybrid_expand(inst, &base, args.neighbors)?;
            return Ok((expanded, Some(base.value)));
        }
    };
    Ok((support, None))
}

fn write_solution_files(
    measure: &DiscreteMeasure,
    out: Option<&Path>,
    render: Option<&Path>,
    grid: usize,
    meta: serde_json::Map<String, serde_json::Value>,
) -> Result<()> {
    if let Some(path) = out {
        write_measure_with_meta(path, measure, Some(meta))
            .with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote barycenter measure to {}", path.display());
    }
    if let Some(path) = render {
        let mode = render_mode_for(measure)?;
        write_render(path, measure, grid, mode)
            .with_context(|| format!("rendering {}", path.display()))?;
        eprintln!("wrote render to {}", path.display());
    }
    Ok(())
}

fn cmd_barycenter(args: BarycenterArgs) -> Result<i32> {
    let start = Instant::now();
    let inst = load_instance(&args.input)?;
    let limits = args.limits.to_limits();
    eprintln!(
        "instance: k={} measures, {} atoms total, d={}",
        inst.k(),
        inst.total_atoms(),
        inst.dim()
    );
    let (support, base_value) = build_support(&inst, &args, &limits)?;
    eprintln!(
        "support: {} candidate atoms ({} before dedup) via {}",
        support.len(),
        support.pre_dedup(),
        support.provenance().algorithm_id()
    );
    let sol: BarycenterSolution = solve_barycenter(&inst, &support, args.mode.into(), &limits)?;
    let diag = &sol.diagnostics;
    let optimal = diag.termination.is_optimal();
    let audit = audit_value(&inst, &sol.measure, sol.value, optimal)?;
    eprintln!(
        "solve: mode={} termination={} value={:.12e} rounds={} pivots={} wall={:.1?}",
        diag.mode,
        diag.termination.as_str(),
        sol.value,
        diag.pricing_rounds,
        diag.lp_pivots,
        diag.wall
    );
    eprintln!("audit: independently recomputed objective {audit:.12e}");

    // A certified bracket for the unrestricted optimum v* exists when the
    // enumerated family's per-instance guarantee applies and the
    // restricted solve finished: v(S)/bound <= v* <= v(S).
    let certificate = if optimal {
        match args.algorithm {
            Algorithm::S1Enum => Some(ratio_bound(WeightRegime::General, inst.k(), args.t)?),
            Algorithm::S2Enum if inst.is_equal_weights() => {
                Some(ratio_bound(WeightRegime::EqualWeights, inst.k(), args.t)?)
            }
            _ => None,
        }
    } else {
        None
    };
    let mut summary = json!({
        "command": "barycenter",
        "algorithm": args.algorithm.name(),
        "t": args.t,
        "value": sol.value,
        "audit": audit,
        "support_pre_dedup": diag.support_pre_dedup,
        "support_size": diag.support_size,
        "barycenter_atoms": sol.measure.len(),
        "mode": diag.mode,
        "termination": diag.termination.as_str(),
        "master_solves": diag.master_solves,
        "pricing_rounds": diag.pricing_rounds,
        "lp_pivots": diag.lp_pivots,
        "wall_ms": start.elapsed().as_millis() as u64,
    });
    let obj = summary.as_object_mut().expect("object");
    if let Some(lb) = diag.lower_bound {
        obj.insert("restricted_lower_bound".into(), json!(lb));
    }
    if let Some(bound) = certificate {
        obj.insert("ratio_bound".into(), json!(bound));
        obj.insert("certified_lower_bound".into(), json!(sol.value / bound));
        eprintln!(
            "certificate: optimum lies in [{:.12e}, {:.12e}] (ratio bound {:.6})",
            sol.value / bound,
            sol.value,
            bound
        );
    }
    if let Some(base) = base_value {
        obj.insert("base_value".into(), json!(base));
    }

    let mut meta = serde_json::Map::new();
    meta.insert("algorithm".into(), json!(args.algorithm.name()));
    meta.insert("t".into(), json!(args.t));
    meta.insert("value".into(), json!(sol.value));
    write_solution_files(
        &sol.measure,
        args.out.as_deref(),
        args.render.as_deref(),
        args.grid,
        meta,
    )?;

    println!("{summary}");
    Ok(if optimal { EXIT_OK } else { EXIT_EARLY_STOP })
}

fn cmd_exact(args: ExactArgs) -> Result<i32> {
    let start = Instant::now();
    let inst = load_instance(&args.input)?;
    let limits = args.limits.to_limits();
    eprintln!(
        "instance: k={} measures, {} atoms total, d={}, {} support tuples",
        inst.k(),
        inst.total_atoms(),
        inst.dim(),
        inst.tuple_count()
    );
    let sol = solve_exact(&inst, &limits)?;
    let audit = audit_value(&inst, &sol.measure, sol.value, true)?;
    eprintln!(
        "exact: value={:.12e} support={} pivots={}",
        sol.value,
        sol.support.len(),
        sol.lp_pivots
    );
    eprintln!("audit: independently recomputed objective {audit:.12e}");
    let summary = json!({
        "command": "exact",
        "value": sol.value,
        "audit": audit,
        "support_size": sol.support.len(),
        "barycenter_atoms": sol.measure.len(),
        "lp_pivots": sol.lp_pivots,
        "wall_ms": start.elapsed().as_millis() as u64,
    });
    let mut meta = serde_json::Map::new();
    meta.insert("algorithm".into(), json!("exact"));
    meta.insert("value".into(), json!(sol.value));
    write_solution_files(
        &sol.measure,
        args.out.as_deref(),
        args.render.as_deref(),
        args.grid,
        meta,
    )?;
    println!("{summary}");
    Ok(EXIT_OK)
}

fn cmd_distance(args: DistanceArgs) -> Result<i32> {
    let start = Instant::now();
    let a = load_measure(&args.a, args.scale.as_deref())?;
    let b = load_measure(&args.b, args.scale.as_deref())?;
    eprintln!(
        "measures: {} atoms (d={}) vs {} atoms (d={})",
        a.len(),
        a.dim(),
        b.len(),
        b.dim()
    );
    let (value, plan) = w2_squared(&a, &b)?;
    eprintln!("transport plan carries {} nonzero entries", plan.entries.len());
    let summary = json!({
        "command": "distance",
        "w2_squared": value,
        "w2": value.sqrt(),
        "plan_entries": plan.entries.len(),
        "wall_ms": start.elapsed().as_millis() as u64,
    });
    println!("{summary}");
    Ok(EXIT_OK)
}

fn cmd_classify(args: ClassifyArgs) -> Result<i32> {
    let start = Instant::now();
    if args.classes.len() < 2 {
        bail!(
            "classification needs at least two --class files, got {}",
            args.classes.len()
        );
    }
    let scale = args.scale.as_deref();
    let classes = args
        .classes
        .iter()
        .map(|p| load_measure(p, scale))
        .collect::<Result<Vec<_>>>()?;
    let d = classes[0].dim();
    for (i, c) in classes.iter().enumerate() {
        if c.dim() != d {
            bail!(
                "class {} ({}) has dimension {}, class 0 has {}",
                i,
                args.classes[i].display(),
                c.dim(),
                d
            );
        }
    }
    if let Some(labels) = &args.labels {
        if labels.len() != args.tests.len() {
            bail!(
                "--labels carries {} entries for {} test measures",
                labels.len(),
                args.tests.len()
            );
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes.len()) {
            bail!("label {bad} out of range for {} classes", classes.len());
        }
    }
    let mut assignments = Vec::with_capacity(args.tests.len());
    let mut min_distances = Vec::with_capacity(args.tests.len());
    let mut ties = Vec::new();
    for (idx, path) in args.tests.iter().enumerate() {
        let test = load_measure(path, scale)?;
        if test.dim() != d {
            bail!(
                "test measure {} has dimension {}, classes have {}",
                path.display(),
                test.dim(),
                d
            );
        }
        let mut dists = Vec::with_capacity(classes.len());
        for class in &classes {
            dists.push(w2_squared(&test, class)?.0);
        }
        // Equal distances resolve to the lowest class index.
        let mut best = 0usize;
        for (c, &dist) in dists.iter().enumerate().skip(1) {
            if dist < dists[best] {
                best = c;
            }
        }
        let best_dist = dists[best];
        let tol = 1e-12 * (1.0 + best_dist.abs());
        let tied = dists
            .iter()
            .enumerate()
            .any(|(c, &dist)| c != best && (dist - best_dist).abs() <= tol);
        if tied {
            ties.push(idx);
        }
        eprintln!(
            "{} -> class {} (w2_squared={:.12e}{})",
            path.display(),
            best,
            best_dist,
            if tied { ", tie broken to lowest index" } else { "" }
        );
        assignments.push(best);
        min_distances.push(best_dist);
    }
    let mut summary = json!({
        "command": "classify",
        "classes": args.classes.len(),
        "assignments": assignments,
        "min_distance": min_distances,
        "ties": ties,
        "wall_ms": start.elapsed().as_millis() as u64,
    });
    if let Some(labels) = &args.labels {
        let mut confusion = vec![vec![0usize; classes.len()]; classes.len()];
        let mut correct = 0usize;
        for (&truth, &pred) in labels.iter().zip(&assignments) {
            confusion[truth][pred] += 1;
            if truth == pred {
                correct += 1;
            }
        }
        let accuracy = correct as f64 / labels.len() as f64;
        eprintln!("accuracy: {correct}/{} = {accuracy:.4}", labels.len());
        for (truth, row) in confusion.iter().enumerate() {
            eprintln!("confusion[true={truth}]: {row:?}");
        }
        let obj = summary.as_object_mut().expect("object");
        obj.insert("accuracy".into(), json!(accuracy));
        obj.insert("confusion".into(), json!(confusion));
    }
    println!("{summary}");
    Ok(EXIT_OK)
}

fn cmd_render(args: RenderArgs) -> Result<i32> {
    let start = Instant::now();
    let measure = load_measure(&args.input, None)?;
    let mode = match args.mode {
        Some(RenderModeArg::Gray) => RenderMode::Gray,
        Some(RenderModeArg::Rgb) => RenderMode::Rgb,
        None => render_mode_for(&measure)?,
    };
    write_render(&args.out, &measure, args.grid, mode)
        .with_context(|| format!("rendering {}", args.out.display()))?;
    eprintln!(
        "rendered {} atoms onto a {}x{} grid at {}",
        measure.len(),
        args.grid,
        args.grid,
        args.out.display()
    );
    let summary = json!({
        "command": "render",
        "grid": args.grid,
        "mode": match mode { RenderMode::Gray => "gray", RenderMode::Rgb => "rgb" },
        "out": args.out.display().to_string(),
        "wall_ms": start.elapsed().as_millis() as u64,
    });
    println!("{summary}");
    Ok(EXIT_OK)
}

fn parse_cells(text: &str) -> Result<Vec<SuiteCell>> {
    let mut cells = Vec::new();
    for part in text.split(';').filter(|p| !p.trim().is_empty()) {
        let nums = part
            .split(',')
            .map(|x| x.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("cell {part:?} is not a k,n,d triple"))?;
        if nums.len() != 3 {
            bail!("cell {part:?} is not a k,n,d triple");
        }
        cells.push(SuiteCell { k: nums[0], n: nums[1], d: nums[2] });
    }
    Ok(cells)
}

fn cmd_bench_ratio(args: RatioArgs) -> Result<i32> {
    let start = Instant::now();
    let config = SuiteConfig {
        cells: parse_cells(&args.cells)?,
        instances_per_cell: args.instances,
        t_values: args.t.clone(),
        weight_kind: match args.weights {
            WeightsArg::Equal => WeightKind::Equal,
            WeightsArg::Random => WeightKind::Random,
        },
        seed: args.seed,
        exhaustive_limit: args.exhaustive_limit,
        mc_draws: args.mc_draws,
        limits: SolveLimits::default(),
    };
    let report = run_ratio_suite(&config)?;
    for record in &report.records {
        if record.pass == Some(false) {
            eprintln!(
                "VIOLATION: k={} n={} d={} t={} {}: value {:.12e} > bound {:.6} * exact {:.12e}",
                record.cell.k,
                record.cell.n,
                record.cell.d,
                record.t,
                record.algorithm,
                record.value,
                record.bound,
                record.exact
            );
        }
    }
    eprintln!(
        "suite: {} records, max ratio {:.6}, mean ratio {:.6}, {} violations",
        report.records.len(),
        report.max_ratio,
        report.mean_ratio,
        report.violations
    );
    if let Some(path) = &args.out {
        report.write_csv(path)?;
        eprintln!("wrote CSV report to {}", path.display());
    }
    let summary = json!({
        "command": "bench-ratio",
        "records": report.records.len(),
        "violations": report.violations,
        "max_ratio": report.max_ratio,
        "mean_ratio": report.mean_ratio,
        "wall_ms": start.elapsed().as_millis() as u64,
    });
    println!("{summary}");
    Ok(if report.violations == 0 { EXIT_OK } else { EXIT_ERROR })
}

fn cmd_bench_ellipse(args: EllipseArgs) -> Result<i32> {
    let start = Instant::now();
    let config = EllipseConfig {
        count: args.count,
        grid: args.grid,
        seed: args.seed,
        t_values: args.t.clone(),
        cross_check_t: Some(args.cross_check_t),
        out_dir: args.out.clone(),
        limits: SolveLimits::default(),
    };
    let report = run_ellipse_pipeline(&config)?;
    for v in &report.violations {
        eprintln!("VIOLATION: {v}");
    }
    for stage in &report.stages {
        eprintln!(
            "t={}: value={:.12e} support={} ({} before dedup) termination={} solve={:.1?} stage={:.1?}",
            stage.t,
            stage.value,
            stage.support_size,
            stage.support_pre_dedup,
            stage.termination.as_str(),
            stage.solve_wall,
            stage.wall
        );
    }
    if let Some(dir) = &args.out {
        eprintln!("wrote dataset, renders and report under {}", dir.display());
    }
    let stages: Vec<serde_json::Value> = report
        .stages
        .iter()
        .map(|s| {
            json!({
                "t": s.t,
                "value": s.value,
                "compact_value": s.compact_value,
                "support_size": s.support_size,
                "termination": s.termination.as_str(),
            })
        })
        .collect();
    let summary = json!({
        "command": "bench-ellipse",
        "dataset_atoms": report.dataset_atom_counts,
        "stages": stages,
        "violations": report.violations,
        "wall_ms": start.elapsed().as_millis() as u64,
    });
    println!("{summary}");
    Ok(if report.violations.is_empty() { EXIT_OK } else { EXIT_ERROR })
}

//! Experiment harness: ratio certification against the exact oracle,
//! sampling-expectation studies, and the nested-ellipse pipeline.
//!
//! The ratio suite draws random instances, solves each exactly, and checks
//! every enumerated candidate family against its proven bound. Sampled
//! families are bounded only in expectation, so they are checked by
//! exhaustively averaging `v(S)` over every possible index draw weighted
//! by its sampling probability whenever that enumeration is small enough;
//! otherwise a seeded Monte Carlo mean is reported without a hard verdict,
//! since a finite-sample mean may legitimately exceed an expectation
//! bound.
//!
//! Reports serialize to CSV without wall-clock columns, so identical
//! configurations produce byte-identical artifacts.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand_core::RngCore;
use thiserror::Error;

use crate::candidates::{
    build_multiset_support, build_s1_enum, build_s1_sample, build_s2_enum, build_s2_sample,
    for_each_multiset, for_each_subset, CandidateError,
};
use crate::io::{generate_nested_ellipses, write_measure, write_render, IoError, RenderMode};
use crate::measure::{BarycenterInstance, DiscreteMeasure, MeasureError, Point};
use crate::oracle::{ratio_bound, solve_exact, OracleError, WeightRegime};
use crate::rng;
use crate::solver::{
    solve_fixed_support_lp, solve_restricted_colgen, SolveError, SolveLimits, Termination,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("suite has no cells")]
    EmptySuite,
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Candidate(#[from] CandidateError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("io: {0}")]
    File(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    Equal,
    Random,
}

impl WeightKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            WeightKind::Equal => "equal",
            WeightKind::Random => "random",
        }
    }
}

/// Random test instance: `k` measures of `n` atoms each, coordinates
/// uniform in the unit box.
///
/// Draw order from the ChaCha8 stream of `seed`, fixed for
/// reproducibility: per measure, `n * d` coordinates then `n` mass
/// variates; after all measures, `k` weight variates when `kind` is
/// `Random`. Masses and weights are drawn as `0.5 + U` (symmetric positive
/// with ratio at most 3) and normalized; equal weights are exactly `1/k`.
pub fn random_instance(
    k: usize,
    n: usize,
    d: usize,
    kind: WeightKind,
    seed: u64,
) -> Result<BarycenterInstance, MeasureError> {
    let mut stream = rng::stream(seed);
    let mut measures = Vec::with_capacity(k);
    for _ in 0..k {
        let atoms: Vec<Point> = (0..n)
            .map(|_| Point::new((0..d).map(|_| rng::unit_f64(&mut stream)).collect()))
            .collect();
        let raw: Vec<f64> = (0..n).map(|_| 0.5 + rng::unit_f64(&mut stream)).collect();
        let total: f64 = raw.iter().sum();
        let masses = raw.into_iter().map(|m| m / total).collect();
        measures.push(DiscreteMeasure::new(atoms, masses)?);
    }
    match kind {
        WeightKind::Equal => BarycenterInstance::equal(measures),
        WeightKind::Random => {
            let raw: Vec<f64> = (0..k).map(|_| 0.5 + rng::unit_f64(&mut stream)).collect();
            let total: f64 = raw.iter().sum();
            let weights = raw.into_iter().map(|w| w / total).collect();
            BarycenterInstance::new(measures, weights)
        }
    }
}

/// Which sampled candidate family an expectation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFamily {
    /// Index multisets drawn i.i.d. from the weight law.
    S1,
    /// Uniform index subsets (equal-weights family).
    S2,
}

fn binomial(k: usize, t: usize) -> Option<u64> {
    if t > k {
        return Some(0);
    }
    let mut acc: u64 = 1;
    for i in 0..t {
        acc = acc.checked_mul((k - i) as u64)? / (i + 1) as u64;
    }
    Some(acc)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Probability of drawing `multiset` (sorted) as the unordered outcome of
/// `t` i.i.d. index draws with law `weights`: the multinomial mass
/// `t! / prod(c_i!) * prod(weights_i ^ c_i)`.
fn multiset_probability(multiset: &[usize], weights: &[f64]) -> f64 {
    let mut prob = factorial(multiset.len());
    let mut run = 0;
    while run < multiset.len() {
        let idx = multiset[run];
        let mut end = run + 1;
        while end < multiset.len() && multiset[end] == idx {
            end += 1;
        }
        let count = end - run;
        prob /= factorial(count);
        prob *= weights[idx].powi(count as i32);
        run = end;
    }
    prob
}

fn collect_multisets(k: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for_each_multiset(k, t, |idx| {
        out.push(idx.to_vec());
        Ok(())
    })
    .expect("infallible enumeration");
    out
}

fn collect_subsets(k: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for_each_subset(k, t, |idx| {
        out.push(idx.to_vec());
        Ok(())
    })
    .expect("infallible enumeration");
    out
}

fn restricted_value(
    inst: &BarycenterInstance,
    indices: &[usize],
    limits: &SolveLimits,
) -> Result<f64, BenchError> {
    let support = build_multiset_support(inst, indices)?;
    Ok(solve_restricted_colgen(inst, &support, limits)?.value)
}

/// Exact expectation of the sampled restricted value `E[v(S^T)]`, obtained
/// by enumerating every possible index draw and weighting each `v(S)` by
/// its sampling probability. Returns `None` when the draw space is larger
/// than `exhaustive_limit` (`k^t` outcomes for S1, `C(k,t)` for S2).
pub fn expected_sampled_value(
    inst: &BarycenterInstance,
    family: SampleFamily,
    t: usize,
    exhaustive_limit: usize,
    limits: &SolveLimits,
) -> Result<Option<f64>, BenchError> {
    if t == 0 {
        return Err(BenchError::Candidate(CandidateError::ZeroT));
    }
    let k = inst.k();
    match family {
        SampleFamily::S1 => {
            let admissible = (k as u64)
                .checked_pow(t as u32)
                .is_some_and(|count| count <= exhaustive_limit as u64);
            if !admissible {
                return Ok(None);
            }
            let mut expectation = 0.0;
            let mut covered = 0.0;
            for multiset in collect_multisets(k, t) {
                let prob = multiset_probability(&multiset, inst.weights());
                expectation += prob * restricted_value(inst, &multiset, limits)?;
                covered += prob;
            }
            debug_assert!((covered - 1.0).abs() < 1e-9, "probabilities sum to {covered}");
            Ok(Some(expectation))
        }
        SampleFamily::S2 => {
            if t > k {
                return Err(BenchError::Candidate(CandidateError::TooManyIndices { t, k }));
            }
            let count = binomial(k, t).unwrap_or(u64::MAX);
            if count > exhaustive_limit as u64 {
                return Ok(None);
            }
            let mut expectation = 0.0;
            let prob = 1.0 / count as f64;
            for subset in collect_subsets(k, t) {
                expectation += prob * restricted_value(inst, &subset, limits)?;
            }
            Ok(Some(expectation))
        }
    }
}

/// Seeded Monte Carlo mean of the sampled restricted value over `draws`
/// independent index draws.
pub fn monte_carlo_sampled_value(
    inst: &BarycenterInstance,
    family: SampleFamily,
    t: usize,
    draws: usize,
    seed: u64,
    limits: &SolveLimits,
) -> Result<f64, BenchError> {
    let mut stream = rng::stream(seed);
    let mut total = 0.0;
    for _ in 0..draws {
        let draw_seed = stream.next_u64();
        let support = match family {
            SampleFamily::S1 => build_s1_sample(inst, t, draw_seed)?,
            SampleFamily::S2 => build_s2_sample(inst, t, draw_seed)?,
        };
        total += solve_restricted_colgen(inst, &support, limits)?.value;
    }
    Ok(total / draws as f64)
}

/// One `(k, n, d)` point of the random-instance grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteCell {
    pub k: usize,
    pub n: usize,
    pub d: usize,
}

/// The default certification grid: `k in {3,4,5}`, `n in {2,3,4}`, `d = 2`.
pub fn default_suite_cells() -> Vec<SuiteCell> {
    let mut cells = Vec::new();
    for k in [3, 4, 5] {
        for n in [2, 3, 4] {
            cells.push(SuiteCell { k, n, d: 2 });
        }
    }
    cells
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub cells: Vec<SuiteCell>,
    pub instances_per_cell: usize,
    pub t_values: Vec<usize>,
    pub weight_kind: WeightKind,
    pub seed: u64,
    /// Exhaustive expectation is used when the sampled draw space has at
    /// most this many outcomes.
    pub exhaustive_limit: usize,
    /// Monte Carlo repetitions when exhaustive expectation is infeasible.
    pub mc_draws: usize,
    pub limits: SolveLimits,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            cells: default_suite_cells(),
            instances_per_cell: 12,
            t_values: vec![1, 2],
            weight_kind: WeightKind::Random,
            seed: 0,
            exhaustive_limit: 10_000,
            mc_draws: 200,
            limits: SolveLimits::default(),
        }
    }
}

/// One certification result: a restricted (or expected restricted) value
/// against the exact optimum and the proven bound.
#[derive(Debug, Clone)]
pub struct RatioRecord {
    pub cell: SuiteCell,
    pub instance: usize,
    pub t: usize,
    pub weights: WeightKind,
    /// "s1-enum", "s2-enum", "s1-sample-exp", "s2-sample-exp",
    /// "s1-sample-mc" or "s2-sample-mc".
    pub algorithm: &'static str,
    pub value: f64,
    pub exact: f64,
    pub ratio: f64,
    pub bound: f64,
    /// `None` for Monte Carlo records, which carry no hard guarantee.
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, Default)]
pub struct RatioReport {
    pub records: Vec<RatioRecord>,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    /// Asserted records whose bound check failed.
    pub violations: usize,
}

impl RatioReport {
    fn finalize(records: Vec<RatioRecord>) -> Self {
        let asserted: Vec<&RatioRecord> =
            records.iter().filter(|r| r.pass.is_some()).collect();
        let violations = asserted.iter().filter(|r| r.pass == Some(false)).count();
        let max_ratio = asserted.iter().map(|r| r.ratio).fold(0.0, f64::max);
        let mean_ratio = if asserted.is_empty() {
            0.0
        } else {
            asserted.iter().map(|r| r.ratio).sum::<f64>() / asserted.len() as f64
        };
        RatioReport { records, max_ratio, mean_ratio, violations }
    }

    /// CSV serialization; deliberately carries no timing columns so equal
    /// configurations yield byte-identical files.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,n,d,weights,instance,t,algorithm,value,exact,ratio,bound,status\n");
        for r in &self.records {
            let status = match r.pass {
                Some(true) => "pass",
                Some(false) => "fail",
                None => "unchecked",
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.cell.k,
                r.cell.n,
                r.cell.d,
                r.weights.as_str(),
                r.instance,
                r.t,
                r.algorithm,
                r.value,
                r.exact,
                r.ratio,
                r.bound,
                status
            )
            .expect("string write");
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<(), BenchError> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn ratio_of(value: f64, exact: f64) -> f64 {
    if exact > 0.0 {
        value / exact
    } else if value <= 1e-8 {
        1.0
    } else {
        f64::INFINITY
    }
}

fn bound_check(value: f64, exact: f64, bound: f64) -> bool {
    value <= bound * exact + 1e-8
}

/// Runs the certification suite: for every cell and instance, solves
/// exactly, then checks each candidate family at each `t`.
///
/// Enumerated families are asserted per instance. Sampled families are
/// asserted through their exhaustive expectation when admissible and
/// otherwise reported as unasserted Monte Carlo means. Record order is
/// deterministic in the configuration.
pub fn run_ratio_suite(config: &SuiteConfig) -> Result<RatioReport, BenchError> {
    if config.cells.is_empty() {
        return Err(BenchError::EmptySuite);
    }
    let mut seeds = rng::stream(config.seed);
    let mut records = Vec::new();
    for cell in &config.cells {
        for instance in 0..config.instances_per_cell {
            let inst_seed = seeds.next_u64();
            let inst = random_instance(cell.k, cell.n, cell.d, config.weight_kind, inst_seed)?;
            let exact = solve_exact(&inst, &config.limits)?.value;
            for &t in &config.t_values {
                let mut push = |algorithm: &'static str,
                                value: f64,
                                bound: f64,
                                asserted: bool| {
                    records.push(RatioRecord {
                        cell: *cell,
                        instance,
                        t,
                        weights: config.weight_kind,
                        algorithm,
                        value,
                        exact,
                        ratio: ratio_of(value, exact),
                        bound,
                        pass: asserted.then(|| bound_check(value, exact, bound)),
                    });
                };

                let s1_bound = ratio_bound(WeightRegime::General, cell.k, t)?;
                let s1 = build_s1_enum(&inst, t)?;
                let v_s1 = solve_restricted_colgen(&inst, &s1, &config.limits)?.value;
                push("s1-enum", v_s1, s1_bound, true);

                match expected_sampled_value(
                    &inst,
                    SampleFamily::S1,
                    t,
                    config.exhaustive_limit,
                    &config.limits,
                )? {
                    Some(expectation) => {
                        push("s1-sample-exp", expectation, s1_bound, true)
                    }
                    None => {
                        let mean = monte_carlo_sampled_value(
                            &inst,
                            SampleFamily::S1,
                            t,
                            config.mc_draws,
                            inst_seed ^ 0x5153_3691,
                            &config.limits,
                        )?;
                        push("s1-sample-mc", mean, s1_bound, false);
                    }
                }

                if config.weight_kind == WeightKind::Equal && t <= cell.k {
                    let s2_bound = ratio_bound(WeightRegime::EqualWeights, cell.k, t)?;
                    let s2 = build_s2_enum(&inst, t)?;
                    let v_s2 = solve_restricted_colgen(&inst, &s2, &config.limits)?.value;
                    push("s2-enum", v_s2, s2_bound, true);

                    match expected_sampled_value(
                        &inst,
                        SampleFamily::S2,
                        t,
                        config.exhaustive_limit,
                        &config.limits,
                    )? {
                        Some(expectation) => {
                            push("s2-sample-exp", expectation, s2_bound, true)
                        }
                        None => {
                            let mean = monte_carlo_sampled_value(
                                &inst,
                                SampleFamily::S2,
                                t,
                                config.mc_draws,
                                inst_seed ^ 0x5253_3691,
                                &config.limits,
                            )?;
                            push("s2-sample-mc", mean, s2_bound, false);
                        }
                    }
                }
            }
        }
    }
    Ok(RatioReport::finalize(records))
}

#[derive(Debug, Clone)]
pub struct EllipseConfig {
    pub count: usize,
    pub grid: usize,
    pub seed: u64,
    pub t_values: Vec<usize>,
    /// Also solve with the compact LP at this `t` and compare routes.
    pub cross_check_t: Option<usize>,
    /// When set, measure files, renders and the CSV report land here.
    pub out_dir: Option<PathBuf>,
    pub limits: SolveLimits,
}

impl Default for EllipseConfig {
    fn default() -> Self {
        EllipseConfig {
            count: 10,
            grid: 20,
            seed: 0,
            t_values: vec![1, 2],
            cross_check_t: Some(1),
            out_dir: None,
            limits: SolveLimits::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EllipseStage {
    pub t: usize,
    pub support_pre_dedup: usize,
    pub support_size: usize,
    pub value: f64,
    pub compact_value: Option<f64>,
    pub termination: Termination,
    pub pricing_rounds: usize,
    pub lp_pivots: usize,
    /// Candidate construction plus the restricted solve.
    pub solve_wall: Duration,
    /// Whole stage, including any cross-check solve and file output.
    pub wall: Duration,
}

#[derive(Debug, Clone)]
pub struct EllipseReport {
    pub dataset_atom_counts: Vec<usize>,
    pub stages: Vec<EllipseStage>,
    /// Human-readable descriptions of failed pipeline checks; empty on a
    /// clean run.
    pub violations: Vec<String>,
    pub total_wall: Duration,
}

impl EllipseReport {
    /// CSV serialization without timing columns (see [`RatioReport::to_csv`]).
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("t,support_pre_dedup,support_size,value,compact_value,termination\n");
        for s in &self.stages {
            let compact = s
                .compact_value
                .map(|v| v.to_string())
                .unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{}",
                s.t,
                s.support_pre_dedup,
                s.support_size,
                s.value,
                compact,
                s.termination.as_str()
            )
            .expect("string write");
        }
        out
    }
}

/// Generates the nested-ellipse dataset and solves it with the enumerated
/// general-weights family at each requested `t`.
///
/// Checks recorded in `violations` rather than panicking: route agreement
/// at `cross_check_t` within `1e-6 * (1 + v)`, and value monotonicity
/// between consecutive `t` values whenever the later is a multiple of the
/// earlier (those candidate sets nest). With `out_dir` set, writes the
/// dataset (measure files and renders), per-stage barycenters and renders,
/// and the CSV report.
pub fn run_ellipse_pipeline(config: &EllipseConfig) -> Result<EllipseReport, BenchError> {
    let start = Instant::now();
    let measures = generate_nested_ellipses(config.count, config.grid, config.seed)?;
    let dataset_atom_counts: Vec<usize> = measures.iter().map(|m| m.len()).collect();
    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir)?;
        for (i, m) in measures.iter().enumerate() {
            write_measure(&dir.join(format!("measure-{i:02}.json")), m)?;
            write_render(
                &dir.join(format!("measure-{i:02}.pgm")),
                m,
                config.grid,
                RenderMode::Gray,
            )?;
        }
    }
    let inst = BarycenterInstance::equal(measures)?;
    let mut stages: Vec<EllipseStage> = Vec::new();
    let mut violations = Vec::new();
    for &t in &config.t_values {
        let stage_start = Instant::now();
        let support = build_s1_enum(&inst, t)?;
        let sol = solve_restricted_colgen(&inst, &support, &config.limits)?;
        let solve_wall = stage_start.elapsed();
        let mut compact_value = None;
        if config.cross_check_t == Some(t) {
            let cp = solve_fixed_support_lp(&inst, &support, &config.limits)?;
            compact_value = Some(cp.value);
            let tol = 1e-6 * (1.0 + sol.value.abs());
            if (sol.value - cp.value).abs() > tol {
                violations.push(format!(
                    "solver routes disagree at t={t}: colgen {} vs compact {}",
                    sol.value, cp.value
                ));
            }
        }
        if let Some(prev) = stages.last() {
            if t % prev.t == 0 && sol.value > prev.value + 1e-8 {
                violations.push(format!(
                    "value rose from {} at t={} to {} at t={t}",
                    prev.value, prev.t, sol.value
                ));
            }
        }
        if let Some(dir) = &config.out_dir {
            write_measure(&dir.join(format!("barycenter-t{t}.json")), &sol.measure)?;
            write_render(
                &dir.join(format!("barycenter-t{t}.pgm")),
                &sol.measure,
                config.grid,
                RenderMode::Gray,
            )?;
        }
        stages.push(EllipseStage {
            t,
            support_pre_dedup: support.pre_dedup(),
            support_size: support.len(),
            value: sol.value,
            compact_value,
            termination: sol.diagnostics.termination,
            pricing_rounds: sol.diagnostics.pricing_rounds,
            lp_pivots: sol.diagnostics.lp_pivots,
            solve_wall,
            wall: stage_start.elapsed(),
        });
    }
    let report = EllipseReport {
        dataset_atom_counts,
        stages,
        violations,
        total_wall: start.elapsed(),
    };
    if let Some(dir) = &config.out_dir {
        std::fs::write(dir.join("report.csv"), report.to_csv())?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diracs(values: &[f64]) -> BarycenterInstance {
        let ms = values
            .iter()
            .map(|&v| DiscreteMeasure::dirac(Point::new(vec![v])))
            .collect();
        BarycenterInstance::equal(ms).unwrap()
    }

    #[test]
    fn random_instances_are_reproducible() {
        let a = random_instance(3, 2, 2, WeightKind::Random, 11).unwrap();
        let b = random_instance(3, 2, 2, WeightKind::Random, 11).unwrap();
        for (m1, m2) in a.measures().iter().zip(b.measures()) {
            assert_eq!(m1, m2);
        }
        assert_eq!(a.weights(), b.weights());
        let c = random_instance(3, 2, 2, WeightKind::Random, 12).unwrap();
        assert_ne!(a.measure(0), c.measure(0));
    }

    #[test]
    fn dirac_instances_and_equal_weights() {
        let inst = random_instance(4, 1, 3, WeightKind::Equal, 5).unwrap();
        assert!(inst.measures().iter().all(|m| m.len() == 1));
        assert!(inst.weights().iter().all(|&w| w == 0.25));
        assert!(inst.is_equal_weights());
        let rand = random_instance(4, 1, 3, WeightKind::Random, 5).unwrap();
        let total: f64 = rand.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(rand.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn witness_expectation_attains_the_bound_exactly() {
        let inst = diracs(&[0.0, 1.0, 2.0]);
        let limits = SolveLimits::default();
        let exact = solve_exact(&inst, &limits).unwrap().value;
        assert!((exact - 2.0 / 3.0).abs() < 1e-12);

        let e_s2 = expected_sampled_value(&inst, SampleFamily::S2, 1, 10_000, &limits)
            .unwrap()
            .unwrap();
        assert!((e_s2 - 4.0 / 3.0).abs() < 1e-10, "E[v(S2)] = {e_s2}");
        let bound = ratio_bound(WeightRegime::EqualWeights, 3, 1).unwrap();
        assert!((bound * exact - 4.0 / 3.0).abs() < 1e-12);

        let e_s1 = expected_sampled_value(&inst, SampleFamily::S1, 1, 10_000, &limits)
            .unwrap()
            .unwrap();
        assert!((e_s1 - 4.0 / 3.0).abs() < 1e-10, "E[v(S1)] = {e_s1}");
    }

    #[test]
    fn multiset_probabilities_form_a_distribution() {
        let weights = [0.2, 0.3, 0.5];
        for t in 1..4usize {
            let total: f64 = collect_multisets(3, t)
                .iter()
                .map(|m| multiset_probability(m, &weights))
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "t={t}: total {total}");
        }
        assert!((multiset_probability(&[0, 0, 1], &weights) - 3.0 * 0.04 * 0.3).abs() < 1e-15);
    }

    #[test]
    fn exhaustive_limit_falls_back_to_monte_carlo() {
        let inst = diracs(&[0.0, 1.0, 2.0]);
        let limits = SolveLimits::default();
        let blocked =
            expected_sampled_value(&inst, SampleFamily::S1, 2, 8, &limits).unwrap();
        assert!(blocked.is_none());
        let mc = monte_carlo_sampled_value(&inst, SampleFamily::S2, 1, 30, 9, &limits).unwrap();
        assert!(mc >= 2.0 / 3.0 - 1e-9);
        assert!(mc <= 5.0 / 3.0 + 1e-9);
        let mc2 = monte_carlo_sampled_value(&inst, SampleFamily::S2, 1, 30, 9, &limits).unwrap();
        assert_eq!(mc.to_bits(), mc2.to_bits());
    }

    #[test]
    fn small_suite_runs_clean_in_both_weight_regimes() {
        for kind in [WeightKind::Random, WeightKind::Equal] {
            let config = SuiteConfig {
                cells: vec![SuiteCell { k: 3, n: 2, d: 2 }],
                instances_per_cell: 3,
                t_values: vec![1, 2, 3],
                weight_kind: kind,
                seed: 77,
                ..SuiteConfig::default()
            };
            let report = run_ratio_suite(&config).unwrap();
            assert_eq!(report.violations, 0, "{kind:?}: {:#?}", report.records);
            assert!(report.max_ratio <= 2.0 + 1e-6);
            let per_instance_algs = match kind {
                // s1-enum + s1-sample-exp per t.
                WeightKind::Random => 3 * 2,
                // Plus s2-enum + s2-sample-exp per t (all t <= k here).
                WeightKind::Equal => 3 * 4,
            };
            assert_eq!(report.records.len(), 3 * per_instance_algs);
            if kind == WeightKind::Equal {
                for r in &report.records {
                    if r.algorithm == "s2-enum" && r.t == 3 {
                        assert!(
                            (r.value - r.exact).abs() <= 1e-8 * (1.0 + r.exact),
                            "t=k must be exact: {r:?}"
                        );
                        assert_eq!(r.bound, 1.0);
                    }
                }
            }
            let again = run_ratio_suite(&config).unwrap();
            assert_eq!(report.to_csv(), again.to_csv());
        }
    }

    #[test]
    fn csv_has_documented_header_and_status_column() {
        let config = SuiteConfig {
            cells: vec![SuiteCell { k: 2, n: 2, d: 1 }],
            instances_per_cell: 1,
            t_values: vec![1],
            weight_kind: WeightKind::Random,
            seed: 3,
            ..SuiteConfig::default()
        };
        let report = run_ratio_suite(&config).unwrap();
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,n,d,weights,instance,t,algorithm,value,exact,ratio,bound,status"
        );
        assert_eq!(csv.lines().count(), 1 + report.records.len());
        assert!(csv.lines().skip(1).all(|l| l.ends_with(",pass")
            || l.ends_with(",fail")
            || l.ends_with(",unchecked")));
    }

    #[test]
    fn ellipse_pipeline_runs_clean_at_small_scale() {
        let dir = tempfile::tempdir().unwrap();
        let config = EllipseConfig {
            count: 3,
            grid: 10,
            seed: 4,
            t_values: vec![1, 2],
            cross_check_t: Some(1),
            out_dir: Some(dir.path().to_path_buf()),
            ..EllipseConfig::default()
        };
        let report = run_ellipse_pipeline(&config).unwrap();
        assert!(report.violations.is_empty(), "{:?}", report.violations);
        assert_eq!(report.stages.len(), 2);
        assert!(report.stages[1].value <= report.stages[0].value + 1e-8);
        assert!(report.stages[0].compact_value.is_some());
        assert!(report.stages.iter().all(|s| s.termination.is_optimal()));
        assert!(report.stages.iter().all(|s| s.support_size > 0));
        for i in 0..3 {
            assert!(dir.path().join(format!("measure-0{i}.json")).exists());
            assert!(dir.path().join(format!("measure-0{i}.pgm")).exists());
        }
        assert!(dir.path().join("barycenter-t1.json").exists());
        assert!(dir.path().join("barycenter-t2.pgm").exists());
        let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert!(csv.starts_with("t,support_pre_dedup,support_size,value,"));
        assert_eq!(csv.lines().count(), 3);
    }
}

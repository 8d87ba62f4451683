//! Restricted barycenter solvers over a fixed candidate support.
//!
//! With the support fixed, the barycenter problem is a multi-marginal
//! transport LP whose columns are support tuples (one atom per measure)
//! and whose tuple cost is the cheapest candidate atom for that tuple.
//! Two independent routes solve it:
//!
//! * column generation on the tuple formulation, priced by a separation
//!   oracle that scans `atoms x measures x candidates` in `O(k n |S| d)`
//!   instead of touching the exponential tuple space, and
//! * a compact polynomial-size LP coupling one pairwise transport plan per
//!   measure to a shared barycenter mass vector.
//!
//! Both return the same value; keeping both alive is the cross-check the
//! test suite leans on. Ties anywhere (oracle argmins, recovery argmins)
//! break toward the lowest index so reruns are bitwise identical.

use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::candidates::CandidateSupport;
use crate::lp::{LinearProgram, LpError, LpStatus, Simplex, OPT_TOL};
use crate::measure::{BarycenterInstance, DiscreteMeasure, MeasureError, Point, TupleIndex};
use crate::transport::TransportPlan;

/// A dual value per measure atom, indexed `[measure][atom]`.
pub type DualVector = Vec<Vec<f64>>;

/// Duals with oracle violation above this are accepted as feasible.
pub const ORACLE_FEAS_TOL: f64 = 1e-9;
/// Columns appended to the restricted master per pricing round. The sweep
/// prices one tuple per candidate atom anyway, so generating a batch costs
/// nothing extra and sharply cuts the number of master reoptimizations.
const PRICE_BATCH: usize = 32;
/// Barycenter atoms at or below this mass are pruned during recovery.
pub const PRUNE_TOL: f64 = 1e-12;
/// Tuple plans must reproduce the input marginals within this tolerance.
pub const PLAN_MARGINAL_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("candidate support is empty")]
    EmptySupport,
    #[error("support dimension {got} does not match instance dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dual vector has {got} blocks, instance has {expected} measures")]
    GammaCount { expected: usize, got: usize },
    #[error("dual block {measure} has {got} entries, measure has {expected} atoms")]
    GammaShape { measure: usize, expected: usize, got: usize },
    #[error("compact LP needs {variables} variables, above the guard of {limit}")]
    CompactGuard { variables: usize, limit: usize },
    #[error("tuple plan misses marginal of measure {measure}, atom {atom}, by {error:e}")]
    PlanMarginal { measure: usize, atom: usize, error: f64 },
    #[error("tuple plan is empty")]
    EmptyPlan,
    #[error("tuple index {tuple:?} out of range for measure {measure}")]
    TupleOutOfRange { measure: usize, tuple: Vec<u32> },
    #[error("solver stopped ({0}) before reaching a feasible incumbent")]
    NoIncumbent(&'static str),
    #[error("master LP ended with unexpected status {status:?}")]
    UnexpectedStatus { status: LpStatus },
    #[error("lp engine: {0}")]
    Lp(#[from] LpError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Result of one separation / pricing call.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    /// Most violated tuple (per-measure argmins at the winning atom).
    pub tuple: TupleIndex,
    /// Candidate atom index attaining the minimum.
    pub atom: usize,
    /// Minimum of the reduced tuple cost; the dual vector is feasible if
    /// and only if this is at least `-ORACLE_FEAS_TOL`.
    pub violation: f64,
}

/// Joint mass on support tuples, keyed by the tuple index vector.
#[derive(Debug, Clone, Default)]
pub struct TuplePlan {
    pub entries: BTreeMap<TupleIndex, f64>,
}

impl TuplePlan {
    pub fn total_mass(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Marginal of the plan on measure `i` with `n` atoms.
    pub fn marginal(&self, i: usize, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (tuple, &mass) in &self.entries {
            out[tuple[i] as usize] += mass;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    Auto,
    Colgen,
    Compact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Optimal,
    TimeLimit,
    RoundLimit,
    PivotLimit,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Optimal => "optimal",
            Termination::TimeLimit => "time-limit",
            Termination::RoundLimit => "round-limit",
            Termination::PivotLimit => "pivot-limit",
        }
    }

    pub fn is_optimal(&self) -> bool {
        matches!(self, Termination::Optimal)
    }
}

/// Resource limits and mode thresholds for a solve.
#[derive(Debug, Clone)]
pub struct SolveLimits {
    /// Wall-clock budget, checked between pricing rounds.
    pub time_limit: Option<Duration>,
    /// Maximum separation-oracle calls in column generation.
    pub max_pricing_rounds: Option<usize>,
    /// Simplex pivot budget per LP solve call.
    pub pivot_limit: usize,
    /// Hard ceiling on compact-LP variables.
    pub compact_var_guard: usize,
    /// Auto mode picks the compact LP only below these sizes; the dense
    /// basis inverse makes large row counts impractical.
    pub compact_auto_vars: usize,
    pub compact_auto_rows: usize,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits {
            time_limit: None,
            max_pricing_rounds: None,
            pivot_limit: 1_000_000,
            compact_var_guard: 2_000_000,
            compact_auto_vars: 250_000,
            compact_auto_rows: 3_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Diagnostics {
    /// Route actually taken: "colgen" or "compact".
    pub mode: &'static str,
    pub termination: Termination,
    /// Master LP solves (always 1 for the compact route).
    pub master_solves: usize,
    /// Separation-oracle calls (0 for the compact route).
    pub pricing_rounds: usize,
    pub lp_pivots: usize,
    pub support_pre_dedup: usize,
    pub support_size: usize,
    pub wall: Duration,
    /// Certified lower bound on the restricted value `v(S)`; equals the
    /// value at optimality, and stays valid when stopping early.
    pub lower_bound: Option<f64>,
}

/// A restricted barycenter: measure, objective value over the support,
/// per-measure transport plans and solve diagnostics.
#[derive(Debug, Clone)]
pub struct BarycenterSolution {
    pub measure: DiscreteMeasure,
    pub value: f64,
    pub plans: Vec<TransportPlan>,
    pub diagnostics: Diagnostics,
}

fn check_support(inst: &BarycenterInstance, support: &CandidateSupport) -> Result<(), SolveError> {
    if support.is_empty() {
        return Err(SolveError::EmptySupport);
    }
    let got = support.atoms()[0].dim();
    if got != inst.dim() {
        return Err(SolveError::DimensionMismatch { expected: inst.dim(), got });
    }
    Ok(())
}

/// Finds the tuple and candidate atom minimizing the reduced cost
/// `sum_i (weight_i |w - x_{i,j_i}|^2 - gamma[i][j_i])`.
///
/// The minimum decomposes per measure once the atom is fixed, so the scan
/// is `O(k n |S| d)`. Ties break toward the lowest atom and tuple indices.
pub fn separation_oracle(
    inst: &BarycenterInstance,
    support: &CandidateSupport,
    gamma: &DualVector,
) -> Result<OracleOutcome, SolveError> {
    let outcomes = price_support(inst, support, gamma)?;
    outcomes.into_iter().next().ok_or(SolveError::EmptySupport)
}

/// Full pricing sweep: the best tuple anchored at every candidate atom,
/// sorted by ascending violation with ties toward the lower atom index.
/// The head of the list is the [`separation_oracle`] outcome; the tail
/// supplies further improving columns at no extra sweep cost.
fn price_support(
    inst: &BarycenterInstance,
    support: &CandidateSupport,
    gamma: &DualVector,
) -> Result<Vec<OracleOutcome>, SolveError> {
    check_support(inst, support)?;
    if gamma.len() != inst.k() {
        return Err(SolveError::GammaCount { expected: inst.k(), got: gamma.len() });
    }
    for (i, block) in gamma.iter().enumerate() {
        if block.len() != inst.measure(i).len() {
            return Err(SolveError::GammaShape {
                measure: i,
                expected: inst.measure(i).len(),
                got: block.len(),
            });
        }
    }
    let k = inst.k();
    let weights = inst.weights();
    let mut outcomes = Vec::with_capacity(support.len());
    let mut scratch = vec![0u32; k];
    for (l, w) in support.atoms().iter().enumerate() {
        let mut total = 0.0;
        for i in 0..k {
            let lam = weights[i];
            let mut best_c = f64::INFINITY;
            let mut best_j = 0usize;
            for (j, x) in inst.measure(i).atoms().iter().enumerate() {
                let c = lam * w.sq_dist(x) - gamma[i][j];
                if c < best_c {
                    best_c = c;
                    best_j = j;
                }
            }
            scratch[i] = best_j as u32;
            total += best_c;
        }
        outcomes.push(OracleOutcome { tuple: scratch.clone(), atom: l, violation: total });
    }
    outcomes.sort_by(|a, b| a.violation.total_cmp(&b.violation).then(a.atom.cmp(&b.atom)));
    Ok(outcomes)
}

/// Cheapest candidate atom for a tuple: `(cost, argmin atom)`, ties to the
/// lowest atom index.
fn tuple_cost(
    inst: &BarycenterInstance,
    support: &CandidateSupport,
    tuple: &[u32],
) -> Result<(f64, usize), SolveError> {
    let weights = inst.weights();
    for (i, &j) in tuple.iter().enumerate() {
        if j as usize >= inst.measure(i).len() {
            return Err(SolveError::TupleOutOfRange { measure: i, tuple: tuple.to_vec() });
        }
    }
    let mut best = f64::INFINITY;
    let mut best_atom = 0usize;
    for (l, w) in support.atoms().iter().enumerate() {
        let mut c = 0.0;
        for (i, &j) in tuple.iter().enumerate() {
            c += weights[i] * w.sq_dist(&inst.measure(i).atoms()[j as usize]);
        }
        if c < best {
            best = c;
            best_atom = l;
        }
    }
    Ok((best, best_atom))
}

/// Feasible starter tuples for the master: a generalized northwest-corner
/// sweep advancing one cursor per measure, emitting at most
/// `total_atoms - k + 1` tuples whose combination can carry the marginals.
fn nw_corner_tuples(inst: &BarycenterInstance) -> Vec<TupleIndex> {
    let k = inst.k();
    let mut cursor = vec![0usize; k];
    let mut remaining: Vec<f64> = (0..k).map(|i| inst.measure(i).masses()[0]).collect();
    let mut tuples = Vec::new();
    loop {
        let step = remaining
            .iter()
            .filter(|&&r| r > 1e-15)
            .fold(f64::INFINITY, |a, &b| a.min(b));
        if !step.is_finite() {
            break;
        }
        tuples.push(cursor.iter().map(|&c| c as u32).collect());
        for i in 0..k {
            if remaining[i] <= 1e-15 {
                continue;
            }
            remaining[i] -= step;
            if remaining[i] <= 1e-15 {
                if cursor[i] + 1 < inst.measure(i).len() {
                    cursor[i] += 1;
                    remaining[i] = inst.measure(i).masses()[cursor[i]];
                } else {
                    remaining[i] = 0.0;
                }
            }
        }
    }
    tuples
}

fn row_offsets(inst: &BarycenterInstance) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(inst.k());
    let mut acc = 0;
    for m in inst.measures() {
        offsets.push(acc);
        acc += m.len();
    }
    offsets
}

fn marginal_rhs(inst: &BarycenterInstance) -> Vec<f64> {
    let mut rhs = Vec::with_capacity(inst.total_atoms());
    for m in inst.measures() {
        rhs.extend_from_slice(m.masses());
    }
    rhs
}

/// Solves the restricted problem by column generation: a restricted master
/// over a working tuple set, priced by the sweep behind
/// [`separation_oracle`]. Each round prices the whole support and appends
/// up to [`PRICE_BATCH`] of the most violated unseen tuples, which keeps
/// the round count far below one-column-at-a-time generation. Stops when
/// the most violated tuple is within `1e-7 * (1 + |value|)` of feasible,
/// or when a limit trips, in which case the incumbent is returned together
/// with a still-valid lower bound.
pub fn solve_restricted_colgen(
    inst: &BarycenterInstance,
    support: &CandidateSupport,
    limits: &SolveLimits,
) -> Result<BarycenterSolution, SolveError> {
    let start = Instant::now();
    check_support(inst, support)?;
    let offsets = row_offsets(inst);
    let mut master = LinearProgram::new(marginal_rhs(inst));
    let mut tuples = nw_corner_tuples(inst);
    let mut seen: HashSet<TupleIndex> = tuples.iter().cloned().collect();
    // Seed the pool with the zero-dual sweep: the per-measure nearest
    // atoms of every candidate atom. These cheap tuples sit close to the
    // optimal face and spare the generator many early rounds; the
    // northwest-corner tuples above guarantee a feasible combination.
    let zero_gamma: DualVector =
        inst.measures().iter().map(|m| vec![0.0; m.len()]).collect();
    for outcome in price_support(inst, support, &zero_gamma)? {
        if seen.insert(outcome.tuple.clone()) {
            tuples.push(outcome.tuple);
        }
    }
    for tuple in &tuples {
        let (cost, _) = tuple_cost(inst, support, tuple)?;
        let entries: Vec<(usize, f64)> =
            tuple.iter().enumerate().map(|(i, &j)| (offsets[i] + j as usize, 1.0)).collect();
        master.add_column(cost, &entries)?;
    }
    let mut sx = Simplex::new(&master, limits.pivot_limit)?;
    let mut sol = sx.solve()?;
    let mut master_solves = 1usize;
    let mut pricing_rounds = 0usize;
    let mut lower_bound: Option<f64> = None;
    let termination = loop {
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::IterationLimit => break Termination::PivotLimit,
            status => return Err(SolveError::UnexpectedStatus { status }),
        }
        if let Some(budget) = limits.time_limit {
            if start.elapsed() >= budget {
                break Termination::TimeLimit;
            }
        }
        if let Some(max_rounds) = limits.max_pricing_rounds {
            if pricing_rounds >= max_rounds {
                break Termination::RoundLimit;
            }
        }
        let mut gamma: DualVector = Vec::with_capacity(inst.k());
        let mut at = 0usize;
        for m in inst.measures() {
            gamma.push(sol.duals[at..at + m.len()].to_vec());
            at += m.len();
        }
        pricing_rounds += 1;
        let outcomes = price_support(inst, support, &gamma)?;
        let best_violation = outcomes.first().map_or(f64::INFINITY, |o| o.violation);
        let value = sol.objective;
        let round_bound = value + best_violation.min(0.0);
        lower_bound = Some(lower_bound.map_or(round_bound, |b| b.max(round_bound)));
        let threshold = -OPT_TOL * (1.0 + value.abs());
        if best_violation >= threshold {
            break Termination::Optimal;
        }
        let mut added = 0usize;
        for outcome in outcomes {
            if added >= PRICE_BATCH || outcome.violation >= threshold {
                break;
            }
            if !seen.insert(outcome.tuple.clone()) {
                continue;
            }
            let (cost, _) = tuple_cost(inst, support, &outcome.tuple)?;
            let entries: Vec<(usize, f64)> = outcome
                .tuple
                .iter()
                .enumerate()
                .map(|(i, &j)| (offsets[i] + j as usize, 1.0))
                .collect();
            sx.add_column(cost, &entries)?;
            tuples.push(outcome.tuple);
            added += 1;
        }
        if added == 0 {
            // Every violated tuple is already priced; no further numerical
            // progress is possible.
            break Termination::Optimal;
        }
        sol = sx.reoptimize()?;
        master_solves += 1;
    };
    if sol.primal.is_empty() {
        return Err(SolveError::NoIncumbent(termination.as_str()));
    }
    if termination.is_optimal() {
        lower_bound = Some(lower_bound.map_or(sol.objective, |b| b.max(sol.objective)));
    }
    let mut plan = TuplePlan::default();
    for (idx, &x) in sol.primal.iter().enumerate() {
        if x > 0.0 {
            plan.entries.insert(tuples[idx].clone(), x);
        }
    }
    let (measure, plans) = recover_barycenter(inst, support, &plan)?;
    Ok(BarycenterSolution {
        measure,
        value: sol.objective,
        plans,
        diagnostics: Diagnostics {
            mode: "colgen",
            termination,
            master_solves,
            pricing_rounds,
            lp_pivots: sx.pivots(),
            support_pre_dedup: support.pre_dedup(),
            support_size: support.len(),
            wall: start.elapsed(),
            lower_bound,
        },
    })
}

/// Solves the restricted problem as one compact LP: a transport plan per
/// measure from the shared barycenter masses `m` to that measure, with the
/// `m` column tying the plans together. Variable count is
/// `|S| * (total_atoms + 1)`, guarded by `limits.compact_var_guard`.
pub fn solve_fixed_support_lp(
    inst: &BarycenterInstance,
    support: &CandidateSupport,
    limits: &SolveLimits,
) -> Result<BarycenterSolution, SolveError> {
    let start = Instant::now();
    check_support(inst, support)?;
    let k = inst.k();
    let s = support.len();
    let n_total = inst.total_atoms();
    let variables = s * (n_total + 1);
    if variables > limits.compact_var_guard {
        return Err(SolveError::CompactGuard { variables, limit: limits.compact_var_guard });
    }
    let offsets = row_offsets(inst);
    let mut rhs = marginal_rhs(inst);
    rhs.extend(std::iter::repeat(0.0).take(k * s));
    let link_row = |i: usize, l: usize| n_total + i * s + l;
    let mut lp = LinearProgram::new(rhs);
    let weights = inst.weights();
    for i in 0..k {
        let measure = inst.measure(i);
        for (l, w) in support.atoms().iter().enumerate() {
            for (j, x) in measure.atoms().iter().enumerate() {
                lp.add_column(
                    weights[i] * w.sq_dist(x),
                    &[(offsets[i] + j, 1.0), (link_row(i, l), 1.0)],
                )?;
            }
        }
    }
    let mass_base = lp.num_cols();
    for l in 0..s {
        let entries: Vec<(usize, f64)> = (0..k).map(|i| (link_row(i, l), -1.0)).collect();
        lp.add_column(0.0, &entries)?;
    }
    let mut sx = Simplex::new(&lp, limits.pivot_limit)?;
    let sol = sx.solve()?;
    let termination = match sol.status {
        LpStatus::Optimal => Termination::Optimal,
        LpStatus::IterationLimit => Termination::PivotLimit,
        status => return Err(SolveError::UnexpectedStatus { status }),
    };
    if sol.primal.is_empty() {
        return Err(SolveError::NoIncumbent(termination.as_str()));
    }
    let kept: Vec<usize> =
        (0..s).filter(|&l| sol.primal[mass_base + l] > PRUNE_TOL).collect();
    if kept.is_empty() {
        return Err(SolveError::EmptyPlan);
    }
    let total: f64 = kept.iter().map(|&l| sol.primal[mass_base + l]).sum();
    let mut remap = vec![usize::MAX; s];
    for (new, &l) in kept.iter().enumerate() {
        remap[l] = new;
    }
    let atoms: Vec<Point> = kept.iter().map(|&l| support.atoms()[l].clone()).collect();
    let masses: Vec<f64> = kept.iter().map(|&l| sol.primal[mass_base + l] / total).collect();
    let measure = DiscreteMeasure::new(atoms, masses)?;
    let mut plans = Vec::with_capacity(k);
    for i in 0..k {
        let n_i = inst.measure(i).len();
        // Columns were emitted measure-major, then candidate atom l, then
        // target atom j, so pi[i][l][j] sits at s * offsets[i] + l * n_i + j.
        let base = s * offsets[i];
        let mut entries = Vec::new();
        for &l in &kept {
            for j in 0..n_i {
                let x = sol.primal[base + l * n_i + j];
                if x > 0.0 {
                    entries.push((remap[l], j, x / total));
                }
            }
        }
        plans.push(TransportPlan { n_source: kept.len(), n_target: n_i, entries });
    }
    Ok(BarycenterSolution {
        measure,
        value: sol.objective,
        plans,
        diagnostics: Diagnostics {
            mode: "compact",
            termination,
            master_solves: 1,
            pricing_rounds: 0,
            lp_pivots: sol.pivots,
            support_pre_dedup: support.pre_dedup(),
            support_size: s,
            wall: start.elapsed(),
            lower_bound: if termination.is_optimal() { Some(sol.objective) } else { None },
        },
    })
}

/// Picks the solve route: `Auto` uses the compact LP only when both its
/// variable and row counts are small enough for the dense simplex, and
/// column generation otherwise.
pub fn solve_barycenter(
    inst: &BarycenterInstance,
    support: &CandidateSupport,
    mode: SolveMode,
    limits: &SolveLimits,
) -> Result<BarycenterSolution, SolveError> {
    match mode {
        SolveMode::Colgen => solve_restricted_colgen(inst, support, limits),
        SolveMode::Compact => solve_fixed_support_lp(inst, support, limits),
        SolveMode::Auto => {
            let s = support.len();
            let variables = s * (inst.total_atoms() + 1);
            let rows = inst.total_atoms() + inst.k() * s;
            if variables <= limits.compact_var_guard.min(limits.compact_auto_vars)
                && rows <= limits.compact_auto_rows
            {
                solve_fixed_support_lp(inst, support, limits)
            } else {
                solve_restricted_colgen(inst, support, limits)
            }
        }
    }
}

/// Turns a tuple plan into a barycenter measure and per-measure transport
/// plans: each tuple sends its mass to the cheapest candidate atom for
/// that tuple (lowest index on ties), atoms below `PRUNE_TOL` are pruned
/// and the rest renormalized.
pub fn recover_barycenter(
    inst: &BarycenterInstance,
    support: &CandidateSupport,
    plan: &TuplePlan,
) -> Result<(DiscreteMeasure, Vec<TransportPlan>), SolveError> {
    check_support(inst, support)?;
    if plan.entries.is_empty() {
        return Err(SolveError::EmptyPlan);
    }
    let k = inst.k();
    for (tuple, _) in plan.entries.iter() {
        if tuple.len() != k {
            return Err(SolveError::GammaCount { expected: k, got: tuple.len() });
        }
        for (i, &j) in tuple.iter().enumerate() {
            if j as usize >= inst.measure(i).len() {
                return Err(SolveError::TupleOutOfRange { measure: i, tuple: tuple.clone() });
            }
        }
    }
    for i in 0..k {
        let marginal = plan.marginal(i, inst.measure(i).len());
        for (j, (&got, &want)) in marginal.iter().zip(inst.measure(i).masses()).enumerate() {
            let err = (got - want).abs();
            if err > PLAN_MARGINAL_TOL {
                return Err(SolveError::PlanMarginal { measure: i, atom: j, error: err });
            }
        }
    }
    let s = support.len();
    let mut mass = vec![0.0; s];
    let mut flows: Vec<BTreeMap<(usize, usize), f64>> = vec![BTreeMap::new(); k];
    for (tuple, &m) in &plan.entries {
        let (_, atom) = tuple_cost(inst, support, tuple)?;
        mass[atom] += m;
        for (i, &j) in tuple.iter().enumerate() {
            *flows[i].entry((atom, j as usize)).or_insert(0.0) += m;
        }
    }
    let kept: Vec<usize> = (0..s).filter(|&l| mass[l] > PRUNE_TOL).collect();
    if kept.is_empty() {
        return Err(SolveError::EmptyPlan);
    }
    let total: f64 = kept.iter().map(|&l| mass[l]).sum();
    let mut remap = vec![usize::MAX; s];
    for (new, &l) in kept.iter().enumerate() {
        remap[l] = new;
    }
    let atoms: Vec<Point> = kept.iter().map(|&l| support.atoms()[l].clone()).collect();
    let masses: Vec<f64> = kept.iter().map(|&l| mass[l] / total).collect();
    let measure = DiscreteMeasure::new(atoms, masses)?;
    let mut plans = Vec::with_capacity(k);
    for (i, flow) in flows.into_iter().enumerate() {
        let entries: Vec<(usize, usize, f64)> = flow
            .into_iter()
            .filter(|&((l, _), _)| remap[l] != usize::MAX)
            .map(|((l, j), m)| (remap[l], j, m / total))
            .collect();
        plans.push(TransportPlan {
            n_source: kept.len(),
            n_target: inst.measure(i).len(),
            entries,
        });
    }
    Ok((measure, plans))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::{
        build_exact_support, build_s1_enum, hybrid_expand, Provenance,
    };
    use crate::measure::Point;
    use crate::rng;
    use crate::transport::eval_objective;

    fn diracs(values: &[f64]) -> BarycenterInstance {
        let ms = values
            .iter()
            .map(|&v| DiscreteMeasure::dirac(Point::new(vec![v])))
            .collect();
        BarycenterInstance::equal(ms).unwrap()
    }

    fn manual(points: &[f64]) -> CandidateSupport {
        CandidateSupport::from_atoms(
            points.iter().map(|&v| Point::new(vec![v])).collect(),
            Provenance::Manual,
        )
    }

    fn random_instance(seed: u64, k: usize, n: usize, d: usize, equal: bool) -> BarycenterInstance {
        let mut stream = rng::stream(seed);
        let mut measures = Vec::with_capacity(k);
        for _ in 0..k {
            let atoms: Vec<Point> = (0..n)
                .map(|_| Point::new((0..d).map(|_| rng::unit_f64(&mut stream)).collect()))
                .collect();
            let raw: Vec<f64> = (0..n).map(|_| 0.5 + rng::unit_f64(&mut stream)).collect();
            let total: f64 = raw.iter().sum();
            let masses = raw.into_iter().map(|m| m / total).collect();
            measures.push(DiscreteMeasure::new(atoms, masses).unwrap());
        }
        if equal {
            BarycenterInstance::equal(measures).unwrap()
        } else {
            let raw: Vec<f64> = (0..k).map(|_| 0.5 + rng::unit_f64(&mut stream)).collect();
            let total: f64 = raw.iter().sum();
            let weights: Vec<f64> = raw.into_iter().map(|w| w / total).collect();
            BarycenterInstance::new(measures, weights).unwrap()
        }
    }

    #[test]
    fn oracle_prices_the_dirac_line_with_zero_duals() {
        let inst = diracs(&[0.0, 1.0, 2.0]);
        let support = manual(&[1.0]);
        let gamma = vec![vec![0.0]; 3];
        let out = separation_oracle(&inst, &support, &gamma).unwrap();
        assert_eq!(out.tuple, vec![0, 0, 0]);
        assert_eq!(out.atom, 0);
        assert!((out.violation - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn oracle_matches_exhaustive_reduced_cost_scan() {
        for seed in 0..10u64 {
            let inst = random_instance(seed, 3, 3, 2, false);
            let support = build_s1_enum(&inst, 2).unwrap();
            let mut stream = rng::stream(seed.wrapping_add(0x9e37_79b9));
            let gamma: DualVector = (0..inst.k())
                .map(|i| {
                    (0..inst.measure(i).len())
                        .map(|_| rng::unit_f64(&mut stream) - 0.5)
                        .collect()
                })
                .collect();
            let fast = separation_oracle(&inst, &support, &gamma).unwrap();

            let mut best = f64::INFINITY;
            let mut best_atom = 0usize;
            let mut best_tuple: TupleIndex = vec![0; inst.k()];
            for (l, w) in support.atoms().iter().enumerate() {
                let mut tuple = vec![0usize; inst.k()];
                'tuples: loop {
                    let mut total = 0.0;
                    for (i, &j) in tuple.iter().enumerate() {
                        total += inst.weights()[i] * w.sq_dist(&inst.measure(i).atoms()[j])
                            - gamma[i][j];
                    }
                    if total < best {
                        best = total;
                        best_atom = l;
                        best_tuple = tuple.iter().map(|&j| j as u32).collect();
                    }
                    let mut pos = inst.k();
                    loop {
                        if pos == 0 {
                            break 'tuples;
                        }
                        pos -= 1;
                        tuple[pos] += 1;
                        if tuple[pos] < inst.measure(pos).len() {
                            break;
                        }
                        tuple[pos] = 0;
                    }
                }
            }
            assert_eq!(fast.atom, best_atom, "seed {seed}");
            assert_eq!(fast.tuple, best_tuple, "seed {seed}");
            assert!((fast.violation - best).abs() <= 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn colgen_restricted_values_on_the_dirac_line() {
        let inst = diracs(&[0.0, 1.0, 2.0]);
        let limits = SolveLimits::default();

        let at_one = solve_restricted_colgen(&inst, &manual(&[1.0]), &limits).unwrap();
        assert!((at_one.value - 2.0 / 3.0).abs() < 1e-10);
        assert!(at_one.diagnostics.termination.is_optimal());
        assert_eq!(at_one.measure.len(), 1);
        assert!((at_one.measure.atoms()[0].coords[0] - 1.0).abs() < 1e-12);
        assert!((at_one.diagnostics.lower_bound.unwrap() - 2.0 / 3.0).abs() < 1e-9);

        let at_zero = solve_restricted_colgen(&inst, &manual(&[0.0]), &limits).unwrap();
        assert!((at_zero.value - 5.0 / 3.0).abs() < 1e-10);

        let union = solve_restricted_colgen(&inst, &build_s1_enum(&inst, 1).unwrap(), &limits)
            .unwrap();
        assert!((union.value - 2.0 / 3.0).abs() < 1e-10);
        assert_eq!(union.plans.len(), 3);
        for plan in &union.plans {
            assert!((plan.total_mass() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn compact_lp_matches_colgen_on_the_dirac_line() {
        let inst = diracs(&[0.0, 1.0, 2.0]);
        let limits = SolveLimits::default();
        for (support, want) in [
            (manual(&[1.0]), 2.0 / 3.0),
            (manual(&[0.0]), 5.0 / 3.0),
            (build_s1_enum(&inst, 1).unwrap(), 2.0 / 3.0),
        ] {
            let sol = solve_fixed_support_lp(&inst, &support, &limits).unwrap();
            assert!((sol.value - want).abs() < 1e-10, "got {} want {want}", sol.value);
            assert!(sol.diagnostics.termination.is_optimal());
        }
    }

    #[test]
    fn modes_agree_and_price_out_on_random_instances() {
        for seed in 0..10u64 {
            let k = if seed % 2 == 0 { 2 } else { 3 };
            let inst = random_instance(100 + seed, k, 3, 2, seed % 3 == 0);
            let support = build_s1_enum(&inst, 1).unwrap();
            let limits = SolveLimits::default();
            let cg = solve_restricted_colgen(&inst, &support, &limits).unwrap();
            let cp = solve_fixed_support_lp(&inst, &support, &limits).unwrap();
            let tol = 1e-6 * (1.0 + cg.value.abs());
            assert!(
                (cg.value - cp.value).abs() <= tol,
                "seed {seed}: colgen {} vs compact {}",
                cg.value,
                cp.value
            );
            let audit_cg = eval_objective(&inst, &cg.measure).unwrap();
            assert!((audit_cg - cg.value).abs() <= tol, "seed {seed}: audit {audit_cg}");
            let audit_cp = eval_objective(&inst, &cp.measure).unwrap();
            assert!((audit_cp - cp.value).abs() <= tol, "seed {seed}: audit {audit_cp}");
            assert!(cg.diagnostics.pricing_rounds <= inst.tuple_count() + 1);
            let lb = cg.diagnostics.lower_bound.unwrap();
            assert!(lb <= cg.value + 1e-9, "seed {seed}: lb {lb} above value {}", cg.value);
        }
    }

    #[test]
    fn auto_mode_routes_by_problem_size() {
        let inst = diracs(&[0.0, 1.0, 2.0]);
        let support = build_exact_support(&inst).unwrap();
        let sol = solve_barycenter(&inst, &support, SolveMode::Auto, &SolveLimits::default())
            .unwrap();
        assert_eq!(sol.diagnostics.mode, "compact");
        assert!((sol.value - 2.0 / 3.0).abs() < 1e-10);

        let tight = SolveLimits { compact_auto_rows: 1, ..SolveLimits::default() };
        let sol2 = solve_barycenter(&inst, &support, SolveMode::Auto, &tight).unwrap();
        assert_eq!(sol2.diagnostics.mode, "colgen");
        assert!((sol.value - sol2.value).abs() < 1e-9);
    }

    #[test]
    fn recovery_splits_tuples_to_cheapest_atoms() {
        let p1 = DiscreteMeasure::new(
            vec![Point::new(vec![0.0]), Point::new(vec![2.0])],
            vec![0.5, 0.5],
        )
        .unwrap();
        let p2 = DiscreteMeasure::dirac(Point::new(vec![1.0]));
        let inst = BarycenterInstance::equal(vec![p1, p2]).unwrap();
        let support = manual(&[0.5, 1.5]);
        let mut plan = TuplePlan::default();
        plan.entries.insert(vec![0, 0], 0.5);
        plan.entries.insert(vec![1, 0], 0.5);
        let (measure, plans) = recover_barycenter(&inst, &support, &plan).unwrap();
        assert_eq!(measure.len(), 2);
        assert!((measure.atoms()[0].coords[0] - 0.5).abs() < 1e-12);
        assert!((measure.atoms()[1].coords[0] - 1.5).abs() < 1e-12);
        assert!((measure.masses()[0] - 0.5).abs() < 1e-12);
        assert_eq!(plans[0].entries, vec![(0, 0, 0.5), (1, 1, 0.5)]);
        assert_eq!(plans[1].entries, vec![(0, 0, 0.5), (1, 0, 0.5)]);
    }

    #[test]
    fn recovery_rejects_wrong_marginals() {
        let inst = diracs(&[0.0, 1.0]);
        let support = manual(&[0.5]);
        let mut plan = TuplePlan::default();
        plan.entries.insert(vec![0, 0], 0.5);
        match recover_barycenter(&inst, &support, &plan) {
            Err(SolveError::PlanMarginal { .. }) => {}
            other => panic!("expected marginal rejection, got {other:?}"),
        }
    }

    #[test]
    fn nw_corner_covers_marginals_with_few_tuples() {
        let uniform = DiscreteMeasure::new(
            vec![Point::new(vec![0.0]), Point::new(vec![1.0])],
            vec![0.5, 0.5],
        )
        .unwrap();
        let skewed = DiscreteMeasure::new(
            vec![Point::new(vec![0.0]), Point::new(vec![1.0])],
            vec![0.3, 0.7],
        )
        .unwrap();
        let dirac = DiscreteMeasure::dirac(Point::new(vec![0.5]));

        let pair = BarycenterInstance::equal(vec![uniform.clone(), uniform.clone()]).unwrap();
        assert_eq!(nw_corner_tuples(&pair), vec![vec![0, 0], vec![1, 1]]);

        let with_dirac = BarycenterInstance::equal(vec![dirac, uniform.clone()]).unwrap();
        assert_eq!(nw_corner_tuples(&with_dirac), vec![vec![0, 0], vec![0, 1]]);

        let staircase = BarycenterInstance::equal(vec![skewed, uniform]).unwrap();
        assert_eq!(
            nw_corner_tuples(&staircase),
            vec![vec![0, 0], vec![1, 0], vec![1, 1]]
        );

        let inst = random_instance(9, 4, 5, 3, false);
        let tuples = nw_corner_tuples(&inst);
        assert!(tuples.len() <= inst.total_atoms() - inst.k() + 1);
        for i in 0..inst.k() {
            let seen: Vec<u32> = tuples.iter().map(|t| t[i]).collect();
            assert!(seen.windows(2).all(|w| w[0] <= w[1]), "cursor went backwards");
            assert_eq!(*seen.last().unwrap() as usize, inst.measure(i).len() - 1);
        }
    }

    #[test]
    fn round_limit_keeps_a_feasible_incumbent() {
        let inst = diracs(&[0.0, 1.0, 2.0]);
        let support = manual(&[0.0, 1.0]);
        let limits = SolveLimits { max_pricing_rounds: Some(0), ..SolveLimits::default() };
        let stopped = solve_restricted_colgen(&inst, &support, &limits).unwrap();
        assert_eq!(stopped.diagnostics.termination, Termination::RoundLimit);
        assert!(stopped.diagnostics.lower_bound.is_none());
        assert!(stopped.value >= 2.0 / 3.0 - 1e-9);
    }

    #[test]
    fn early_stop_bounds_sandwich_the_restricted_value() {
        let inst = random_instance(31, 3, 3, 2, true);
        let support = build_s1_enum(&inst, 1).unwrap();
        let full = solve_restricted_colgen(&inst, &support, &SolveLimits::default()).unwrap();
        for rounds in 1..4usize {
            let limits =
                SolveLimits { max_pricing_rounds: Some(rounds), ..SolveLimits::default() };
            let sol = solve_restricted_colgen(&inst, &support, &limits).unwrap();
            assert!(sol.value >= full.value - 1e-9, "incumbent below v(S)");
            if let Some(lb) = sol.diagnostics.lower_bound {
                assert!(lb <= full.value + 1e-9, "lower bound {lb} above v(S) {}", full.value);
            }
        }
    }

    #[test]
    fn zero_time_budget_stops_after_the_first_master_solve() {
        let inst = random_instance(7, 3, 3, 2, true);
        let support = build_s1_enum(&inst, 1).unwrap();
        let limits =
            SolveLimits { time_limit: Some(Duration::ZERO), ..SolveLimits::default() };
        let sol = solve_restricted_colgen(&inst, &support, &limits).unwrap();
        assert_eq!(sol.diagnostics.termination, Termination::TimeLimit);
        assert_eq!(sol.diagnostics.pricing_rounds, 0);
        let full = solve_restricted_colgen(&inst, &support, &SolveLimits::default()).unwrap();
        assert!(sol.value >= full.value - 1e-9);
    }

    #[test]
    fn larger_supports_never_hurt() {
        for seed in 0..5u64 {
            let inst = random_instance(200 + seed, 3, 2, 2, false);
            let limits = SolveLimits::default();
            let small = solve_restricted_colgen(&inst, &build_s1_enum(&inst, 1).unwrap(), &limits)
                .unwrap();
            let big = solve_restricted_colgen(&inst, &build_s1_enum(&inst, 2).unwrap(), &limits)
                .unwrap();
            assert!(
                big.value <= small.value + 1e-8,
                "seed {seed}: v grew from {} to {}",
                small.value,
                big.value
            );
        }
    }

    #[test]
    fn single_measure_barycenter_is_the_measure_itself() {
        let m = DiscreteMeasure::new(
            vec![Point::new(vec![0.0, 0.0]), Point::new(vec![1.0, 2.0])],
            vec![0.25, 0.75],
        )
        .unwrap();
        let inst = BarycenterInstance::new(vec![m], vec![1.0]).unwrap();
        let support = build_s1_enum(&inst, 1).unwrap();
        let sol =
            solve_barycenter(&inst, &support, SolveMode::Auto, &SolveLimits::default()).unwrap();
        assert!(sol.value.abs() < 1e-10);
        assert_eq!(sol.measure.len(), 2);
    }

    #[test]
    fn hybrid_expansion_grows_around_a_solution() {
        let inst = diracs(&[0.0, 1.0, 2.0]);
        let base =
            solve_restricted_colgen(&inst, &manual(&[1.0]), &SolveLimits::default()).unwrap();
        let expanded = hybrid_expand(&inst, &base, 1).unwrap();
        assert_eq!(expanded.provenance().algorithm_id(), "hybrid");
        let coords: Vec<f64> = expanded.atoms().iter().map(|p| p.coords[0]).collect();
        assert_eq!(coords, vec![1.0, 0.0, 2.0, 0.5, 1.5]);
        let better =
            solve_restricted_colgen(&inst, &expanded, &SolveLimits::default()).unwrap();
        assert!(better.value <= base.value + 1e-9);
    }

    #[test]
    fn solves_are_bitwise_deterministic() {
        let inst = random_instance(42, 3, 3, 2, false);
        let support = build_s1_enum(&inst, 2).unwrap();
        let a = solve_restricted_colgen(&inst, &support, &SolveLimits::default()).unwrap();
        let b = solve_restricted_colgen(&inst, &support, &SolveLimits::default()).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.measure.len(), b.measure.len());
        for (p, q) in a.measure.atoms().iter().zip(b.measure.atoms()) {
            for (x, y) in p.coords.iter().zip(&q.coords) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        for (x, y) in a.measure.masses().iter().zip(b.measure.masses()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for (p, q) in a.plans.iter().zip(&b.plans) {
            assert_eq!(p.entries, q.entries);
        }
    }
}

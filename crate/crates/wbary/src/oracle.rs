//! Exact brute-force reference and the a-priori approximation bounds.
//!
//! [`solve_exact`] enumerates every support tuple, prices each at its best
//! possible location (the weighted mean of the tuple), and solves the full
//! multi-marginal LP with all columns present. No pricing, no candidate
//! reduction: this is the slow, guarded route the fast solvers are checked
//! against, so it deliberately shares as little arithmetic with them as
//! possible (tuple costs come from [`fit_point`], not from scans over a
//! candidate set).
//!
//! [`ratio_bound`] returns the proven worst-case ratio `v(S) / v*` for the
//! reduced supports: `1 + 1/t` for the general-weights family and
//! `1 + (k - t) / (t (k - 1))` for the equal-weights family, which reaches
//! exactness at `t = k`.

use thiserror::Error;

use crate::candidates::{build_exact_support, CandidateError, CandidateSupport};
use crate::lp::{solve_lp_with, LinearProgram, LpStatus};
use crate::measure::{fit_point, BarycenterInstance, DiscreteMeasure, Point, TupleIndex};
use crate::solver::{recover_barycenter, SolveError, SolveLimits, TuplePlan};
use crate::transport::TransportPlan;

/// Hard ceiling on the tuple columns the exact solver will enumerate.
pub const MAX_EXACT_TUPLES: usize = 100_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("exact solve needs {tuples} tuple columns, above the guard of {limit}")]
    GuardExceeded { tuples: usize, limit: usize },
    #[error("approximation bounds need t >= 1")]
    ZeroT,
    #[error("equal-weights bound needs k >= 2 and t <= k, got k={k}, t={t}")]
    BoundDomain { k: usize, t: usize },
    #[error(transparent)]
    Candidate(#[from] CandidateError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// A certified optimum of the unrestricted problem.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub measure: DiscreteMeasure,
    /// The optimal value `v*` (clamped at zero against LP round-off).
    pub value: f64,
    pub plans: Vec<TransportPlan>,
    /// The sufficient support the optimum was certified over.
    pub support: CandidateSupport,
    pub lp_pivots: usize,
}

/// Solves the barycenter problem exactly by full tuple enumeration.
///
/// Every tuple of support indices becomes one LP column priced at the
/// weighted mean of its atoms, which is optimal for that tuple, so the LP
/// optimum is the true `v*`. Guarded by [`MAX_EXACT_TUPLES`]; cost grows as
/// the product of the support sizes.
pub fn solve_exact(
    inst: &BarycenterInstance,
    limits: &SolveLimits,
) -> Result<ExactSolution, OracleError> {
    let tuples = inst.tuple_count();
    if tuples > MAX_EXACT_TUPLES {
        return Err(OracleError::GuardExceeded { tuples, limit: MAX_EXACT_TUPLES });
    }
    let support = build_exact_support(inst)?;
    let k = inst.k();
    let weights = inst.weights();
    let mut offsets = Vec::with_capacity(k);
    let mut rhs = Vec::with_capacity(inst.total_atoms());
    for m in inst.measures() {
        offsets.push(rhs.len());
        rhs.extend_from_slice(m.masses());
    }
    let mut lp = LinearProgram::new(rhs);
    let mut index: Vec<TupleIndex> = Vec::with_capacity(tuples);
    let mut choice = vec![0usize; k];
    let mut points: Vec<Point> = Vec::with_capacity(k);
    'enumerate: loop {
        points.clear();
        points.extend(
            choice.iter().enumerate().map(|(i, &j)| inst.measure(i).atoms()[j].clone()),
        );
        let (_, cost) = fit_point(&points, weights);
        let entries: Vec<(usize, f64)> =
            choice.iter().enumerate().map(|(i, &j)| (offsets[i] + j, 1.0)).collect();
        lp.add_column(cost, &entries).map_err(SolveError::from)?;
        index.push(choice.iter().map(|&j| j as u32).collect());
        let mut pos = k;
        loop {
            if pos == 0 {
                break 'enumerate;
            }
            pos -= 1;
            choice[pos] += 1;
            if choice[pos] < inst.measure(pos).len() {
                break;
            }
            choice[pos] = 0;
        }
    }
    let sol = solve_lp_with(&lp, limits.pivot_limit).map_err(SolveError::from)?;
    if sol.status != LpStatus::Optimal {
        return Err(OracleError::Solve(SolveError::UnexpectedStatus { status: sol.status }));
    }
    let mut plan = TuplePlan::default();
    for (rank, &x) in sol.primal.iter().enumerate() {
        if x > 0.0 {
            plan.entries.insert(index[rank].clone(), x);
        }
    }
    let (measure, plans) = recover_barycenter(inst, &support, &plan)?;
    Ok(ExactSolution {
        measure,
        value: sol.objective.max(0.0),
        plans,
        support,
        lp_pivots: sol.pivots,
    })
}

/// Weight regime an approximation bound applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightRegime {
    /// Arbitrary weights; the candidate family averages index multisets.
    General,
    /// Uniform weights; the candidate family averages index subsets.
    EqualWeights,
}

/// Proven worst-case approximation ratio for the restricted value over the
/// size-`t` candidate family: `v(S) <= ratio_bound(..) * v*`.
pub fn ratio_bound(regime: WeightRegime, k: usize, t: usize) -> Result<f64, OracleError> {
    if t == 0 {
        return Err(OracleError::ZeroT);
    }
    match regime {
        WeightRegime::General => Ok(1.0 + 1.0 / t as f64),
        WeightRegime::EqualWeights => {
            if k < 2 || t > k {
                return Err(OracleError::BoundDomain { k, t });
            }
            Ok(1.0 + (k - t) as f64 / (t as f64 * (k - 1) as f64))
        }
    }
}

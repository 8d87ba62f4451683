//! Pairwise squared 2-Wasserstein distances via the transportation LP.
//!
//! `w2_squared` solves the classical transportation program between two
//! discrete measures exactly with the crate's simplex engine. It exists
//! both as a user-facing distance and as the ground-truth audit for the
//! barycenter solvers: `eval_objective` re-scores any candidate barycenter
//! against the instance using nothing but pairwise transport.

use thiserror::Error;

use crate::lp::{LinearProgram, LpError, LpStatus, solve_lp};
use crate::measure::{BarycenterInstance, DiscreteMeasure, MeasureError};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("measures have dimensions {a} and {b}")]
    DimensionMismatch { a: usize, b: usize },
    #[error("lp engine: {0}")]
    Lp(#[from] LpError),
    #[error("transport LP ended with status {status:?}")]
    NotOptimal { status: LpStatus },
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Sparse transport plan between a source and a target measure.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub n_source: usize,
    pub n_target: usize,
    /// `(source atom, target atom, mass)` sorted source-major.
    pub entries: Vec<(usize, usize, f64)>,
}

impl TransportPlan {
    /// Mass leaving each source atom.
    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_source];
        for &(i, _, m) in &self.entries {
            sums[i] += m;
        }
        sums
    }

    /// Mass arriving at each target atom.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_target];
        for &(_, j, m) in &self.entries {
            sums[j] += m;
        }
        sums
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|&(_, _, m)| m).sum()
    }
}

/// Row-major `|a| x |b|` matrix of squared distances between atom pairs.
pub fn cost_matrix(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<Vec<f64>, TransportError> {
    if a.dim() != b.dim() {
        return Err(TransportError::DimensionMismatch { a: a.dim(), b: b.dim() });
    }
    let mut costs = Vec::with_capacity(a.len() * b.len());
    for p in a.atoms() {
        for q in b.atoms() {
            costs.push(p.sq_dist(q));
        }
    }
    Ok(costs)
}

/// Exact squared 2-Wasserstein distance and an optimal plan.
pub fn w2_squared(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
) -> Result<(f64, TransportPlan), TransportError> {
    let costs = cost_matrix(a, b)?;
    let (na, nb) = (a.len(), b.len());
    let mut rhs = Vec::with_capacity(na + nb);
    rhs.extend_from_slice(a.masses());
    rhs.extend_from_slice(b.masses());
    let mut lp = LinearProgram::new(rhs);
    for i in 0..na {
        for j in 0..nb {
            lp.add_column(costs[i * nb + j], &[(i, 1.0), (na + j, 1.0)])?;
        }
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(TransportError::NotOptimal { status: sol.status });
    }
    let mut entries = Vec::new();
    for (idx, &x) in sol.primal.iter().enumerate() {
        if x > 0.0 {
            entries.push((idx / nb, idx % nb, x));
        }
    }
    Ok((sol.objective.max(0.0), TransportPlan { n_source: na, n_target: nb, entries }))
}

/// Barycenter objective of `candidate` against the instance:
/// `sum_i weights[i] * W2^2(candidate, P_i)`.
pub fn eval_objective(
    inst: &BarycenterInstance,
    candidate: &DiscreteMeasure,
) -> Result<f64, TransportError> {
    let mut total = 0.0;
    for (measure, &weight) in inst.measures().iter().zip(inst.weights()) {
        total += weight * w2_squared(candidate, measure)?.0;
    }
    Ok(total)
}

//! Reduced candidate supports with one-sided approximation guarantees.
//!
//! An optimal barycenter is supported on weighted means of support tuples,
//! one atom per input measure. Full enumeration of those means is
//! exponential in `k`; the builders here instead average over only `t`
//! measure indices at a time. Index multisets (repetition allowed) give
//! the general-weights family whose value is within a factor `1 + 1/t` of
//! optimal; plain subsets give the sharper equal-weights family with
//! factor `1 + (k-t)/(t(k-1))`, exact at `t = k`. Both come in a sampled
//! variant (one random index set) and an enumerated variant (all of them).
//!
//! Mean coordinates are accumulated per distinct `(measure, atom)` pair
//! with weight `count/t`, in ascending index order. Identical index
//! multisets therefore produce bitwise-identical atoms regardless of which
//! builder formed them, which makes the nesting relations between the
//! families hold exactly, not just within tolerance.

use thiserror::Error;

use crate::measure::{dedup_key, BarycenterInstance, Point};
use crate::rng;
use crate::solver::BarycenterSolution;

/// Guard on generated atoms before deduplication.
pub const MAX_CANDIDATE_ATOMS: usize = 1_000_000;
/// Neighbor count used by the hybrid expansion unless overridden.
pub const DEFAULT_HYBRID_NEIGHBORS: usize = 5;

#[derive(Debug, Error)]
pub enum CandidateError {
    #[error("t must be at least 1")]
    ZeroT,
    #[error("t = {t} exceeds the number of measures k = {k}")]
    TooManyIndices { t: usize, k: usize },
    #[error("measure index {index} out of range for k = {k}")]
    IndexOutOfRange { index: usize, k: usize },
    #[error("candidate construction would exceed {limit} atoms before deduplication")]
    GuardExceeded { limit: usize },
}

/// How a candidate support was constructed, with enough detail to
/// reproduce it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    /// One index multiset drawn with per-position law `P[T = i] = weight_i`.
    S1Sample { t: usize, seed: u64, multiset: Vec<usize> },
    /// All index multisets of size `t`.
    S1Enum { t: usize },
    /// One uniform size-`t` index subset (equal-weights family).
    S2Sample { t: usize, seed: u64, subset: Vec<usize> },
    /// All size-`t` index subsets (equal-weights family).
    S2Enum { t: usize },
    /// Neighborhood expansion around a previous solution.
    Hybrid { neighbors: usize },
    /// Full tuple enumeration of weighted means (the optimal support).
    UnionExact,
    /// Assembled directly from caller-supplied atoms.
    Manual,
}

impl Provenance {
    pub fn algorithm_id(&self) -> &'static str {
        match self {
            Provenance::S1Sample { .. } => "s1-sample",
            Provenance::S1Enum { .. } => "s1-enum",
            Provenance::S2Sample { .. } => "s2-sample",
            Provenance::S2Enum { .. } => "s2-enum",
            Provenance::Hybrid { .. } => "hybrid",
            Provenance::UnionExact => "union-exact",
            Provenance::Manual => "manual",
        }
    }
}

/// Deduplicated candidate atoms for the restricted barycenter problem.
#[derive(Debug, Clone)]
pub struct CandidateSupport {
    atoms: Vec<Point>,
    pre_dedup: usize,
    provenance: Provenance,
}

impl CandidateSupport {
    /// Deduplicates `atoms` (first occurrence wins) and records where they
    /// came from.
    pub fn from_atoms(atoms: Vec<Point>, provenance: Provenance) -> Self {
        let pre_dedup = atoms.len();
        let mut seen = std::collections::HashSet::new();
        let mut kept = Vec::with_capacity(atoms.len());
        for p in atoms {
            if seen.insert(dedup_key(&p.coords)) {
                kept.push(p);
            }
        }
        CandidateSupport { atoms: kept, pre_dedup, provenance }
    }

    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Atom count before deduplication.
    pub fn pre_dedup(&self) -> usize {
        self.pre_dedup
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }
}

/// Accumulates the means of all atom choices for one index multiset.
///
/// `indices` must be sorted ascending (repeats allowed). Every combination
/// of one atom per position is visited, positions advancing odometer-style
/// with the last position fastest; each mean is formed from the distinct
/// `(measure, atom)` pairs of the combination with weight `count / t`.
fn push_multiset_means(
    inst: &BarycenterInstance,
    indices: &[usize],
    out: &mut Vec<Point>,
) -> Result<(), CandidateError> {
    let t = indices.len();
    let d = inst.dim();
    let t_f = t as f64;
    let mut choice = vec![0usize; t];
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(t);
    loop {
        if out.len() >= MAX_CANDIDATE_ATOMS {
            return Err(CandidateError::GuardExceeded { limit: MAX_CANDIDATE_ATOMS });
        }
        pairs.clear();
        pairs.extend(indices.iter().zip(&choice).map(|(&i, &j)| (i, j)));
        pairs.sort_unstable();
        let mut coords = vec![0.0; d];
        let mut run = 0usize;
        while run < t {
            let (i, j) = pairs[run];
            let mut end = run + 1;
            while end < t && pairs[end] == (i, j) {
                end += 1;
            }
            let w = (end - run) as f64 / t_f;
            for (acc, &c) in coords.iter_mut().zip(&inst.measure(i).atoms()[j].coords) {
                *acc += w * c;
            }
            run = end;
        }
        out.push(Point::new(coords));
        // Odometer over atom choices, last position fastest.
        let mut pos = t;
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            choice[pos] += 1;
            if choice[pos] < inst.measure(indices[pos]).len() {
                break;
            }
            choice[pos] = 0;
        }
    }
}

/// Candidate support of one specific index multiset: means of every atom
/// choice over the given measure indices (repeats allowed, any order).
/// This is the single-draw building block behind the sampled families;
/// the bench harness uses it to average over all draws exhaustively.
pub fn build_multiset_support(
    inst: &BarycenterInstance,
    indices: &[usize],
) -> Result<CandidateSupport, CandidateError> {
    if indices.is_empty() {
        return Err(CandidateError::ZeroT);
    }
    if let Some(&index) = indices.iter().find(|&&i| i >= inst.k()) {
        return Err(CandidateError::IndexOutOfRange { index, k: inst.k() });
    }
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    let mut atoms = Vec::new();
    push_multiset_means(inst, &sorted, &mut atoms)?;
    Ok(CandidateSupport::from_atoms(atoms, Provenance::Manual))
}

/// Visits all nondecreasing index tuples of length `t` over `0..k` in
/// lexicographic order.
pub(crate) fn for_each_multiset(
    k: usize,
    t: usize,
    mut f: impl FnMut(&[usize]) -> Result<(), CandidateError>,
) -> Result<(), CandidateError> {
    let mut idx = vec![0usize; t];
    loop {
        f(&idx)?;
        let mut pos = t;
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            if idx[pos] + 1 < k {
                let v = idx[pos] + 1;
                for slot in idx.iter_mut().skip(pos) {
                    *slot = v;
                }
                break;
            }
        }
    }
}

/// Visits all strictly increasing index tuples of length `t` over `0..k`
/// in lexicographic order.
pub(crate) fn for_each_subset(
    k: usize,
    t: usize,
    mut f: impl FnMut(&[usize]) -> Result<(), CandidateError>,
) -> Result<(), CandidateError> {
    let mut idx: Vec<usize> = (0..t).collect();
    loop {
        f(&idx)?;
        let mut pos = t;
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            if idx[pos] + 1 <= k - (t - pos) {
                idx[pos] += 1;
                for p in pos + 1..t {
                    idx[p] = idx[p - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Sampled general-weights support: draws `t` measure indices i.i.d. with
/// the instance weights as the law, then averages every atom choice over
/// the drawn multiset. The draw consumes exactly `t` uniform variates from
/// the ChaCha8 stream of `seed`.
pub fn build_s1_sample(
    inst: &BarycenterInstance,
    t: usize,
    seed: u64,
) -> Result<CandidateSupport, CandidateError> {
    if t == 0 {
        return Err(CandidateError::ZeroT);
    }
    let mut stream = rng::stream(seed);
    let mut multiset: Vec<usize> =
        (0..t).map(|_| rng::categorical(&mut stream, inst.weights())).collect();
    multiset.sort_unstable();
    let mut atoms = Vec::new();
    push_multiset_means(inst, &multiset, &mut atoms)?;
    Ok(CandidateSupport::from_atoms(atoms, Provenance::S1Sample { t, seed, multiset }))
}

/// Enumerated general-weights support: all index multisets of size `t`.
pub fn build_s1_enum(inst: &BarycenterInstance, t: usize) -> Result<CandidateSupport, CandidateError> {
    if t == 0 {
        return Err(CandidateError::ZeroT);
    }
    let mut atoms = Vec::new();
    for_each_multiset(inst.k(), t, |idx| push_multiset_means(inst, idx, &mut atoms))?;
    Ok(CandidateSupport::from_atoms(atoms, Provenance::S1Enum { t }))
}

/// Sampled equal-weights support: one uniform size-`t` subset of the
/// measure indices (partial Fisher-Yates over the stream of `seed`).
pub fn build_s2_sample(
    inst: &BarycenterInstance,
    t: usize,
    seed: u64,
) -> Result<CandidateSupport, CandidateError> {
    if t == 0 {
        return Err(CandidateError::ZeroT);
    }
    if t > inst.k() {
        return Err(CandidateError::TooManyIndices { t, k: inst.k() });
    }
    let mut stream = rng::stream(seed);
    let subset = rng::subset(&mut stream, inst.k(), t);
    let mut atoms = Vec::new();
    push_multiset_means(inst, &subset, &mut atoms)?;
    Ok(CandidateSupport::from_atoms(atoms, Provenance::S2Sample { t, seed, subset }))
}

/// Enumerated equal-weights support: all size-`t` index subsets.
pub fn build_s2_enum(inst: &BarycenterInstance, t: usize) -> Result<CandidateSupport, CandidateError> {
    if t == 0 {
        return Err(CandidateError::ZeroT);
    }
    if t > inst.k() {
        return Err(CandidateError::TooManyIndices { t, k: inst.k() });
    }
    let mut atoms = Vec::new();
    for_each_subset(inst.k(), t, |idx| push_multiset_means(inst, idx, &mut atoms))?;
    Ok(CandidateSupport::from_atoms(atoms, Provenance::S2Enum { t }))
}

/// The provably sufficient support: weighted means (instance weights) of
/// every support tuple, odometer order with the last measure fastest.
pub fn build_exact_support(inst: &BarycenterInstance) -> Result<CandidateSupport, CandidateError> {
    if inst.tuple_count() > MAX_CANDIDATE_ATOMS {
        return Err(CandidateError::GuardExceeded { limit: MAX_CANDIDATE_ATOMS });
    }
    let k = inst.k();
    let d = inst.dim();
    let weights = inst.weights();
    let mut atoms = Vec::with_capacity(inst.tuple_count());
    let mut choice = vec![0usize; k];
    loop {
        let mut coords = vec![0.0; d];
        for (i, &j) in choice.iter().enumerate() {
            let w = weights[i];
            for (acc, &c) in coords.iter_mut().zip(&inst.measure(i).atoms()[j].coords) {
                *acc += w * c;
            }
        }
        atoms.push(Point::new(coords));
        let mut pos = k;
        loop {
            if pos == 0 {
                return Ok(CandidateSupport::from_atoms(atoms, Provenance::UnionExact));
            }
            pos -= 1;
            choice[pos] += 1;
            if choice[pos] < inst.measure(pos).len() {
                break;
            }
            choice[pos] = 0;
        }
    }
}

/// Neighborhood expansion around a previous solution: the solution's
/// active atoms, plus for each active atom the `neighbors` nearest support
/// points of every input measure, plus all pairwise averages of that pool.
pub fn hybrid_expand(
    inst: &BarycenterInstance,
    base: &BarycenterSolution,
    neighbors: usize,
) -> Result<CandidateSupport, CandidateError> {
    let active = base.measure.atoms();
    let mut pool: Vec<Point> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut push_pool = |pool: &mut Vec<Point>, p: Point| {
        if seen.insert(dedup_key(&p.coords)) {
            pool.push(p);
        }
    };
    for a in active {
        push_pool(&mut pool, a.clone());
    }
    for a in active {
        for measure in inst.measures() {
            let mut order: Vec<usize> = (0..measure.len()).collect();
            let dist: Vec<f64> = measure.atoms().iter().map(|x| x.sq_dist(a)).collect();
            order.sort_by(|&p, &q| dist[p].partial_cmp(&dist[q]).unwrap().then(p.cmp(&q)));
            for &j in order.iter().take(neighbors) {
                push_pool(&mut pool, measure.atoms()[j].clone());
            }
        }
    }
    let n = pool.len();
    let generated = n + n * (n + 1) / 2;
    if generated > MAX_CANDIDATE_ATOMS {
        return Err(CandidateError::GuardExceeded { limit: MAX_CANDIDATE_ATOMS });
    }
    let mut atoms: Vec<Point> = pool.clone();
    for i in 0..n {
        for j in i..n {
            let coords = pool[i]
                .coords
                .iter()
                .zip(&pool[j].coords)
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            atoms.push(Point::new(coords));
        }
    }
    Ok(CandidateSupport::from_atoms(atoms, Provenance::Hybrid { neighbors }))
}

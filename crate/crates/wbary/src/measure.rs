//! Weighted point sets in Euclidean space and barycenter problem instances.
//!
//! Everything downstream works with squared Euclidean distances. The one
//! piece of geometry that matters is `fit_point`: the cheapest single
//! location for a weighted tuple of points is its weighted mean, and the
//! cost of placing the tuple there has a closed form. The expansion
//! identity `fit_cost_against(w) = c_star + |w - w_star|^2` is what lets
//! candidate supports be scored without re-deriving anything per atom.

use thiserror::Error;

/// Masses must sum to one within this tolerance after normalization.
pub const MASS_SUM_TOL: f64 = 1e-12;
/// Raw mass vectors whose sum drifts from one by at most this much are
/// silently renormalized; larger drift is rejected.
pub const MASS_DRIFT_TOL: f64 = 1e-9;
/// Atoms whose coordinates agree after rounding to this grid are merged.
pub const DEDUP_TOL: f64 = 1e-9;
/// Barycenter weights must lie on the simplex within this tolerance.
pub const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("measure has no atoms")]
    Empty,
    #[error("atom {index} has dimension {got}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("atom {index} has a non-finite coordinate")]
    NonFiniteCoordinate { index: usize },
    #[error("atom {index} has invalid mass {mass}")]
    InvalidMass { index: usize, mass: f64 },
    #[error("masses sum to {sum}, drift {drift:e} exceeds {limit:e}")]
    MassDrift { sum: f64, drift: f64, limit: f64 },
    #[error("expected {expected} masses for {expected} atoms, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("instance needs at least one measure")]
    NoMeasures,
    #[error("measure {index} has dimension {got}, expected {expected}")]
    MixedDimensions { index: usize, expected: usize, got: usize },
    #[error("weight {index} is invalid: {weight}")]
    InvalidWeight { index: usize, weight: f64 },
    #[error("weights sum to {sum}, drift {drift:e} exceeds {limit:e}")]
    WeightDrift { sum: f64, drift: f64, limit: f64 },
}

/// A location in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Squared Euclidean distance to `other`. Panics if dimensions differ.
    pub fn sq_dist(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.coords.len(), other.coords.len());
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| {
                let d = a - b;
                d * d
            })
            .sum()
    }

    pub fn sq_norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum()
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Point { coords }
    }
}

/// Rounding key used for atom deduplication: coordinates rounded to the
/// `DEDUP_TOL` grid. `-0.0` normalizes to `0` so signed zeros collide.
pub(crate) fn dedup_key(coords: &[f64]) -> Vec<i64> {
    coords
        .iter()
        .map(|&c| {
            let r = (c / DEDUP_TOL).round();
            if r == 0.0 {
                0
            } else {
                r as i64
            }
        })
        .collect()
}

/// Outcome of validating raw measure data before construction.
#[derive(Debug, Clone, Copy)]
pub struct MeasureReport {
    /// Factor the masses were divided by to restore total mass one.
    pub renorm_factor: f64,
    /// Number of atoms merged into an earlier duplicate.
    pub merged: usize,
}

/// Checks raw atom/mass data against the measure invariants without
/// building anything. Duplicate detection uses the `DEDUP_TOL` rounding
/// grid; mass drift up to `MASS_DRIFT_TOL` is reported as a renormalization
/// factor, anything larger is an error.
pub fn validate_measure(atoms: &[Point], masses: &[f64]) -> Result<MeasureReport, MeasureError> {
    if atoms.is_empty() {
        return Err(MeasureError::Empty);
    }
    if atoms.len() != masses.len() {
        return Err(MeasureError::LengthMismatch { expected: atoms.len(), got: masses.len() });
    }
    let d = atoms[0].dim();
    let mut keys = std::collections::HashSet::new();
    let mut merged = 0usize;
    for (i, p) in atoms.iter().enumerate() {
        if p.dim() != d {
            return Err(MeasureError::DimensionMismatch { index: i, expected: d, got: p.dim() });
        }
        if p.coords.iter().any(|c| !c.is_finite()) {
            return Err(MeasureError::NonFiniteCoordinate { index: i });
        }
        if !keys.insert(dedup_key(&p.coords)) {
            merged += 1;
        }
    }
    let mut sum = 0.0;
    for (i, &m) in masses.iter().enumerate() {
        if !m.is_finite() || m < 0.0 {
            return Err(MeasureError::InvalidMass { index: i, mass: m });
        }
        sum += m;
    }
    let drift = (sum - 1.0).abs();
    if drift > MASS_DRIFT_TOL {
        return Err(MeasureError::MassDrift { sum, drift, limit: MASS_DRIFT_TOL });
    }
    Ok(MeasureReport { renorm_factor: sum, merged })
}

/// A finitely supported probability measure: distinct atoms with
/// nonnegative masses summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<Point>,
    masses: Vec<f64>,
}

impl DiscreteMeasure {
    /// Validates, merges duplicate atoms (first occurrence wins, masses
    /// accumulate) and renormalizes small mass drift.
    pub fn new(atoms: Vec<Point>, masses: Vec<f64>) -> Result<Self, MeasureError> {
        Ok(Self::with_report(atoms, masses)?.0)
    }

    /// Like [`DiscreteMeasure::new`] but also reports the applied
    /// renormalization factor and merge count.
    pub fn with_report(
        atoms: Vec<Point>,
        masses: Vec<f64>,
    ) -> Result<(Self, MeasureReport), MeasureError> {
        let report = validate_measure(&atoms, &masses)?;
        let mut out_atoms: Vec<Point> = Vec::with_capacity(atoms.len());
        let mut out_masses: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut index = std::collections::HashMap::new();
        for (p, m) in atoms.into_iter().zip(masses) {
            match index.entry(dedup_key(&p.coords)) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    out_masses[*e.get()] += m;
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(out_atoms.len());
                    out_atoms.push(p);
                    out_masses.push(m);
                }
            }
        }
        if report.renorm_factor != 1.0 {
            for m in &mut out_masses {
                *m /= report.renorm_factor;
            }
        }
        Ok((DiscreteMeasure { atoms: out_atoms, masses: out_masses }, report))
    }

    /// Unit mass at a single point.
    pub fn dirac(p: Point) -> Self {
        DiscreteMeasure { atoms: vec![p], masses: vec![1.0] }
    }

    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    /// Applies a per-coordinate scale factor to every atom.
    pub fn scaled(&self, scale: &[f64]) -> Result<Self, MeasureError> {
        if scale.len() != self.dim() {
            return Err(MeasureError::MixedDimensions {
                index: 0,
                expected: self.dim(),
                got: scale.len(),
            });
        }
        let atoms = self
            .atoms
            .iter()
            .map(|p| Point::new(p.coords.iter().zip(scale).map(|(c, s)| c * s).collect()))
            .collect();
        DiscreteMeasure::new(atoms, self.masses.clone())
    }
}

/// Atom indices into each input measure, one per measure.
pub type TupleIndex = Vec<u32>;

/// A weighted family of measures on a common ambient space.
#[derive(Debug, Clone)]
pub struct BarycenterInstance {
    measures: Vec<DiscreteMeasure>,
    weights: Vec<f64>,
    equal_weights: bool,
}

impl BarycenterInstance {
    /// Validates dimensions and the weight simplex. Weight drift up to
    /// `MASS_DRIFT_TOL` is renormalized, larger drift is rejected. The
    /// equal-weights flag is set when every weight is within `WEIGHT_TOL`
    /// of `1/k` after normalization.
    pub fn new(measures: Vec<DiscreteMeasure>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        if measures.is_empty() {
            return Err(MeasureError::NoMeasures);
        }
        if weights.len() != measures.len() {
            return Err(MeasureError::LengthMismatch {
                expected: measures.len(),
                got: weights.len(),
            });
        }
        let d = measures[0].dim();
        for (i, m) in measures.iter().enumerate() {
            if m.dim() != d {
                return Err(MeasureError::MixedDimensions { index: i, expected: d, got: m.dim() });
            }
        }
        let mut sum = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(MeasureError::InvalidWeight { index: i, weight: w });
            }
            sum += w;
        }
        let drift = (sum - 1.0).abs();
        if drift > MASS_DRIFT_TOL {
            return Err(MeasureError::WeightDrift { sum, drift, limit: MASS_DRIFT_TOL });
        }
        let weights: Vec<f64> = weights.into_iter().map(|w| w / sum).collect();
        let uniform = 1.0 / measures.len() as f64;
        let equal_weights = weights.iter().all(|&w| (w - uniform).abs() <= WEIGHT_TOL);
        Ok(BarycenterInstance { measures, weights, equal_weights })
    }

    /// Equal-weight instance with weights exactly `1/k`.
    pub fn equal(measures: Vec<DiscreteMeasure>) -> Result<Self, MeasureError> {
        let k = measures.len();
        BarycenterInstance::new(measures, vec![1.0 / k as f64; k])
    }

    pub fn k(&self) -> usize {
        self.measures.len()
    }

    pub fn dim(&self) -> usize {
        self.measures[0].dim()
    }

    pub fn measures(&self) -> &[DiscreteMeasure] {
        &self.measures
    }

    pub fn measure(&self, i: usize) -> &DiscreteMeasure {
        &self.measures[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_equal_weights(&self) -> bool {
        self.equal_weights
    }

    /// Total atom count over all measures.
    pub fn total_atoms(&self) -> usize {
        self.measures.iter().map(|m| m.len()).sum()
    }

    /// Product of support sizes, saturating on overflow.
    pub fn tuple_count(&self) -> usize {
        self.measures.iter().fold(1usize, |acc, m| acc.saturating_mul(m.len()))
    }
}

/// Weighted mean of `points` and the cost of collapsing them there:
/// returns `(w_star, c_star)` with `w_star = sum_i weights[i] * points[i]`
/// and `c_star = sum_i weights[i] |points[i] - w_star|^2`.
///
/// `weights` is assumed to lie on the simplex; lengths and dimensions must
/// match (checked in debug builds only, this is a hot kernel).
pub fn fit_point(points: &[Point], weights: &[f64]) -> (Point, f64) {
    debug_assert!(!points.is_empty());
    debug_assert_eq!(points.len(), weights.len());
    let d = points[0].dim();
    let mut mean = vec![0.0; d];
    for (p, &w) in points.iter().zip(weights) {
        debug_assert_eq!(p.dim(), d);
        for (acc, c) in mean.iter_mut().zip(&p.coords) {
            *acc += w * c;
        }
    }
    let w_star = Point::new(mean);
    let mut c_star = 0.0;
    for (p, &w) in points.iter().zip(weights) {
        c_star += w * p.sq_dist(&w_star);
    }
    (w_star, c_star)
}

/// Cost of collapsing the weighted tuple onto an arbitrary location `w`.
/// Equals `c_star + |w - w_star|^2` for the values from [`fit_point`].
pub fn fit_cost_against(points: &[Point], weights: &[f64], w: &Point) -> f64 {
    debug_assert_eq!(points.len(), weights.len());
    points.iter().zip(weights).map(|(p, &wt)| wt * p.sq_dist(w)).sum()
}

//! Discrete Wasserstein barycenters with provable approximation guarantees.
//!
//! The barycenter of measures `P_1, .., P_k` with weights `lambda` is the
//! discrete measure minimizing `sum_i lambda_i W_2^2(P, P_i)`. An optimal
//! barycenter is supported on weighted means of support tuples, which turns
//! the problem into a linear program over a finite candidate support. This
//! crate builds reduced candidate supports with one-sided approximation
//! guarantees (`candidates`), solves the restricted problem either by
//! column generation with a separation oracle or as a compact fixed-support
//! LP (`solver`), certifies small instances exactly (`oracle`), and ships
//! the supporting pieces: an LP engine (`lp`), pairwise transport costs
//! (`transport`), file and image handling (`io`), and a benchmark harness
//! (`bench`).

pub mod bench;
pub mod candidates;
pub mod io;
pub mod lp;
pub mod measure;
pub mod oracle;
pub mod rng;
pub mod solver;
pub mod transport;

pub use measure::{
    fit_cost_against, fit_point, validate_measure, BarycenterInstance, DiscreteMeasure,
    MeasureError, Point, TupleIndex,
};

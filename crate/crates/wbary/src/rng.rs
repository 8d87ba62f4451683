//! Deterministic random draws for sampling algorithms and generators.
//!
//! Every randomized routine in this crate consumes a ChaCha8 stream seeded
//! directly from a caller-supplied `u64` and derives values through the
//! helpers below, so a seed pins the exact output across platforms and
//! releases independent of any external distribution code.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

/// Creates the ChaCha8 stream for `seed`.
pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw from `[0, 1)` using the top 53 bits of one `u64` word.
pub fn unit_f64(rng: &mut Stream) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw from `{0, .., n-1}`. Panics if `n == 0`.
pub fn index_below(rng: &mut Stream, n: usize) -> usize {
    assert!(n > 0);
    let i = (unit_f64(rng) * n as f64) as usize;
    i.min(n - 1)
}

/// Categorical draw: returns `i` with probability `probs[i]`. `probs` is
/// assumed to sum to one; the final index absorbs any rounding slack.
pub fn categorical(rng: &mut Stream, probs: &[f64]) -> usize {
    debug_assert!(!probs.is_empty());
    let u = unit_f64(rng);
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Uniform size-`t` subset of `{0, .., k-1}` via a partial Fisher-Yates
/// shuffle, returned in increasing order.
pub fn subset(rng: &mut Stream, k: usize, t: usize) -> Vec<usize> {
    assert!(t <= k);
    let mut pool: Vec<usize> = (0..k).collect();
    for i in 0..t {
        let j = i + index_below(rng, k - i);
        pool.swap(i, j);
    }
    let mut picked: Vec<usize> = pool[..t].to_vec();
    picked.sort_unstable();
    picked
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_draws_are_in_range_and_reproducible() {
        let mut a = stream(7);
        let mut b = stream(7);
        for _ in 0..1000 {
            let x = unit_f64(&mut a);
            assert!((0.0..1.0).contains(&x));
            assert_eq!(x, unit_f64(&mut b));
        }
    }

    #[test]
    fn categorical_respects_point_mass() {
        let mut rng = stream(3);
        for _ in 0..50 {
            assert_eq!(categorical(&mut rng, &[0.0, 1.0, 0.0]), 1);
        }
    }

    #[test]
    fn subsets_are_sorted_and_distinct() {
        let mut rng = stream(11);
        for _ in 0..200 {
            let s = subset(&mut rng, 7, 3);
            assert_eq!(s.len(), 3);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            assert!(s.iter().all(|&i| i < 7));
        }
    }

    #[test]
    fn subset_frequencies_roughly_uniform() {
        // 2 of 4: six subsets, 6000 draws, expect about 1000 each.
        let mut rng = stream(5);
        let mut counts = std::collections::BTreeMap::new();
        for _ in 0..6000 {
            *counts.entry(subset(&mut rng, 4, 2)).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        for &c in counts.values() {
            assert!((700..1300).contains(&c), "count {c} far from uniform");
        }
    }
}

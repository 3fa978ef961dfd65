//! Shared fixtures for unit tests.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Instance, LabelVector};

/// Dataset drawn from a few label patterns whose features carry the pattern
/// plus noise, so models have something learnable.
pub(crate) fn synthetic_dataset(n: usize, k: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let patterns: Vec<Vec<u8>> = (0..4)
        .map(|_| (0..k).map(|_| rng.random_range(0..=1u8)).collect())
        .collect();
    Dataset::new(
        (0..n)
            .map(|_| {
                let p = rng.random_range(0..patterns.len());
                let bits = patterns[p].clone();
                let features: Vec<f64> = bits
                    .iter()
                    .map(|&b| b as f64 * 2.0 - 1.0 + rng.random_range(-0.3..0.3))
                    .chain((0..2).map(|_| rng.random_range(-1.0..1.0)))
                    .collect();
                Instance::new(features, LabelVector::new(bits).unwrap())
            })
            .collect(),
    )
    .unwrap()
}

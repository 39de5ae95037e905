//! Seeded randomness helpers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate; portable and reproducible across platforms.
pub type Rng64 = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream for a sub-task (a graph size, a generator, a run).
pub fn derive(seed: u64, stream: u64) -> Rng64 {
    // splitmix64 finalizer over the pair keeps nearby seeds uncorrelated
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

/// Draw an index from an unnormalized non-negative weight vector.
pub fn sample_categorical<R: rand::Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return rng.random_range(0..weights.len());
    }
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    // rounding: fall back to the last positive entry
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

//! Deterministic randomness.
//!
//! All randomness in the crate flows from a single 64-bit seed. Independent
//! consumers draw from separate ChaCha streams identified by a [`Stream`]
//! id, so adding draws to one purpose never perturbs another. Derived seeds
//! (per sweep cell, per curriculum phase, ...) come from [`mix`].

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose ids for the per-stream generators. The numeric values are part
/// of the reproducibility contract: renumbering them changes outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Model parameter initialization.
    Init = 1,
    /// Mini-batch shuffling in training loops.
    Shuffle = 2,
    /// Observation noise on trajectories.
    Noise = 3,
    /// Initial-condition sampling for data generation.
    InitialState = 4,
    /// Random unit directions for local-linearization checks.
    Directions = 5,
    /// Rademacher probes for Hessian trace estimation.
    Hessian = 6,
    /// Start-index sampling for long-horizon diagnostics.
    Starts = 7,
}

/// A ChaCha generator for `seed` on the given purpose stream.
pub fn stream(seed: u64, s: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s as u64);
    rng
}

/// Derives a child seed from `seed` and an index (splitmix64 finalizer).
pub fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9e3779b97f4a7c15)
        .wrapping_add(index.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_independent() {
        let a: f64 = stream(7, Stream::Init).gen();
        let b: f64 = stream(7, Stream::Shuffle).gen();
        assert_ne!(a, b);
        // Same stream twice is identical.
        let a2: f64 = stream(7, Stream::Init).gen();
        assert_eq!(a, a2);
    }

    #[test]
    fn mix_spreads_indices() {
        let s: Vec<u64> = (0..100).map(|i| mix(42, i)).collect();
        let mut dedup = s.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), s.len());
    }
}

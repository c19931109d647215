//! Seeded random streams shared by the simulators.
//!
//! One generator (ChaCha12) everywhere. Each replicate or trade gets its own
//! substream keyed by `(seed, index)`, so draws do not depend on evaluation
//! order and a single replicate can be reproduced in isolation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type Stream = ChaCha12Rng;

/// Independent substream for replicate `index` of a run seeded with `seed`.
pub fn substream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Unrelated seed for a named sub-purpose of a run, so e.g. the Monte Carlo
/// cross-check and the settlement simulation never share draws.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let a: f64 = substream(7, 0).random();
        let b: f64 = substream(7, 0).random();
        let c: f64 = substream(7, 1).random();
        let d: f64 = substream(8, 0).random();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_ne!(a.to_bits(), c.to_bits());
        assert_ne!(a.to_bits(), d.to_bits());
    }

    #[test]
    fn derived_seeds_separate_purposes() {
        assert_ne!(derive_seed(42, 1), derive_seed(42, 2));
        assert_ne!(derive_seed(42, 1), 42);
        assert_eq!(derive_seed(42, 1), derive_seed(42, 1));
    }
}

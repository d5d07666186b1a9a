//! Fixed 64-bit mixing primitives.
//!
//! Everything random in the pipeline is derived from these functions, so two
//! implementations that agree on them agree on every generated dataset. The
//! finalizer is SplitMix64 (Steele, Lea and Flood); byte strings are hashed
//! with 64-bit FNV-1a.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const FNV_OFFSET: u64 = 0xCBF2_9CE4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01B3;

/// One SplitMix64 step applied to `x` as the state.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive combination of two words.
#[inline]
pub fn mix(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b))
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Per-record seed: `mix(mix(strategy_seed, record_id), kind_tag)`.
pub fn record_seed(strategy_seed: u64, record_id: u64, kind_tag: u64) -> u64 {
    mix(mix(strategy_seed, record_id), kind_tag)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Deterministic stream of words, SplitMix64 in generator form.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let out = splitmix64(self.state);
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        out
    }

    /// Uniform in [-1, 1).
    #[inline]
    pub fn next_signed_unit(&mut self) -> f64 {
        let bits = self.next_u64() >> 11;
        (bits as f64) * (1.0 / (1u64 << 53) as f64) * 2.0 - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // Reference stream for seed 1234567 from the published generator.
        let mut g = SplitMix64::new(1234567);
        assert_eq!(g.next_u64(), 6457827717110365317);
        assert_eq!(g.next_u64(), 3203168211198807973);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn record_seed_is_sensitive_to_every_input() {
        let base = record_seed(42, 7, 3);
        assert_ne!(base, record_seed(43, 7, 3));
        assert_ne!(base, record_seed(42, 8, 3));
        assert_ne!(base, record_seed(42, 7, 4));
        assert_eq!(base, record_seed(42, 7, 3));
    }

    #[test]
    fn signed_unit_range() {
        let mut g = SplitMix64::new(9);
        for _ in 0..10_000 {
            let x = g.next_signed_unit();
            assert!((-1.0..1.0).contains(&x));
        }
    }
}

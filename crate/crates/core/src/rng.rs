//! Reproducible random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream whose key is
//! derived from a user seed and a tag (operation name plus integer
//! coordinates such as `(n, replicate)`). The result of a task therefore
//! never depends on scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed, a textual tag and integer coordinates into a 64-bit key.
pub fn derive_key(seed: u64, tag: &str, coords: &[u64]) -> u64 {
    let mut h = splitmix64(seed);
    for b in tag.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    for &c in coords {
        h = splitmix64(h ^ splitmix64(c));
    }
    h
}

/// Independent stream for `(seed, tag, coords)`.
pub fn stream(seed: u64, tag: &str, coords: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_key(seed, tag, coords))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, "poisson", &[1, 2]).random();
        let b: u64 = stream(7, "poisson", &[1, 2]).random();
        let c: u64 = stream(7, "poisson", &[2, 1]).random();
        let d: u64 = stream(7, "iid", &[1, 2]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}

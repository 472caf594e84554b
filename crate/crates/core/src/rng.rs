//! Addressable random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator whose key is
//! derived from a base seed plus a short path of integers (replication,
//! method, row, purpose, ...). Two computations that use the same path see the
//! same numbers no matter which thread runs them or in which order.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::evaluation::normal_quantile;

/// Domain tags that keep unrelated consumers of one seed apart.
pub mod domain {
    pub const FEATURES: u64 = 0x4645_4154;
    pub const TARGET: u64 = 0x5441_5247;
    pub const PARAMS: u64 = 0x5041_5241;
    pub const PLAN: u64 = 0x504c_414e;
    pub const FOREST: u64 = 0x464f_5245;
    pub const AZCHECK: u64 = 0x415a_4348;
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a path of integers into a single 64-bit key.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(seed), |acc, &p| mix64(acc ^ mix64(p)))
}

/// Generator for the stream addressed by `(seed, path)`.
pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let key = derive(seed, path);
    let mut bytes = [0u8; 32];
    let mut state = key;
    for chunk in bytes.chunks_exact_mut(8) {
        state = mix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// Stable 64-bit FNV-1a hash, used to turn identifiers into stream ids.
pub fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Uniform draw on the open interval (0, 1).
#[inline]
pub fn open_unit<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw by inversion.
#[inline]
pub fn standard_normal<R: RngCore>(rng: &mut R) -> f64 {
    normal_quantile(open_unit(rng)).expect("open_unit lies in (0, 1)")
}

/// Uniform integer in `0..bound` (Lemire's nearly-divisionless method).
pub fn below<R: RngCore>(rng: &mut R, bound: usize) -> usize {
    debug_assert!(bound > 0);
    let bound = bound as u64;
    let mut m = u128::from(rng.next_u64()) * u128::from(bound);
    if (m as u64) < bound {
        let threshold = bound.wrapping_neg() % bound;
        while (m as u64) < threshold {
            m = u128::from(rng.next_u64()) * u128::from(bound);
        }
    }
    (m >> 64) as usize
}

/// In-place Fisher-Yates shuffle.
pub fn shuffle<R: RngCore, T>(rng: &mut R, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i + 1);
        items.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_path_same_numbers() {
        let mut a = stream(7, &[1, 2, 3]);
        let mut b = stream(7, &[1, 2, 3]);
        for _ in 0..16 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = stream(7, &[1, 2, 4]);
        assert_ne!(stream(7, &[1, 2, 3]).next_u64(), c.next_u64());
    }

    #[test]
    fn below_stays_in_range_and_hits_every_value() {
        let mut rng = stream(1, &[]);
        let mut seen = [0usize; 7];
        for _ in 0..7000 {
            seen[below(&mut rng, 7)] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800 && c < 1200), "{seen:?}");
    }

    #[test]
    fn open_unit_never_hits_endpoints() {
        let mut rng = stream(3, &[]);
        for _ in 0..10_000 {
            let u = open_unit(&mut rng);
            assert!(u > 0.0 && u < 1.0);
        }
    }
}

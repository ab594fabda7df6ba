//! Seeded randomness.
//!
//! Every random stream in the crate is a `Xoshiro256PlusPlus` generator seeded
//! through SplitMix64 (`seed_from_u64`). Derived streams mix their keys with
//! [`mix`] so that, for example, a dropout mask depends only on
//! `(seed, step, layer)`.

use rand::RngCore;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Rng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> Rng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines a base seed with stream keys into a new seed.
pub fn mix(seed: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix(seed), |acc, &k| splitmix(acc ^ splitmix(k)))
}

/// Uniform integer in `0..bound` via the 128-bit multiply-high method.
pub fn below(rng: &mut Rng, bound: usize) -> usize {
    debug_assert!(bound > 0);
    ((rng.next_u64() as u128 * bound as u128) >> 64) as usize
}

/// Uniform real in `[0, 1)` with 53 bits of precision.
pub fn unit(rng: &mut Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Fisher-Yates shuffle, walking from the last slot down.
pub fn shuffle<T>(items: &mut [T], rng: &mut Rng) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i + 1);
        items.swap(i, j);
    }
}

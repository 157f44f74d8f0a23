//! Counter-based random streams.
//!
//! Every experiment is keyed by a 64-bit seed. Work is split into numbered
//! units (sample blocks, root partitions, ...) and unit `k` draws from
//! `stream(seed, k)`, an independent ChaCha8 stream. Because the stream is a
//! pure function of `(seed, k)`, results are identical for any thread count
//! as long as per-unit results are merged in unit order or by addition.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type StreamRng = ChaCha8Rng;

/// Independent stream number `key` of `seed`.
pub fn stream(seed: u64, key: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

/// Derives a child seed for a named sub-experiment (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw on the open interval (0, 1).
#[inline]
pub fn open01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Samples per RNG block in the parallel drivers.
pub const BLOCK: u64 = 1024;

/// Runs `samples` draws split into blocks of [`BLOCK`], block `k` on
/// `stream(seed, k)`, and returns the per-block results in block order.
///
/// `f` receives the block's stream, the index of its first sample and the
/// number of samples in the block.
pub fn par_blocks<T, F>(seed: u64, samples: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng, u64, u64) -> T + Sync,
{
    let blocks = samples.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k);
            let start = k * BLOCK;
            f(&mut rng, start, BLOCK.min(samples - start))
        })
        .collect()
}

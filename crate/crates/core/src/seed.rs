//! Seed derivation.
//!
//! Every random stream in the crate is keyed by a master seed plus a small
//! path of integers (stream tag, view index, tree index, ...). Streams are
//! therefore independent of evaluation order, which keeps parallel and
//! serial execution bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const STREAM_TREE: u64 = 0x7472_6565;
pub(crate) const STREAM_VIEW: u64 = 0x7669_6577;
pub(crate) const STREAM_FINAL: u64 = 0x6669_6e61;
pub(crate) const STREAM_SPLIT: u64 = 0x7370_6c74;
pub(crate) const STREAM_RUN: u64 = 0x7275_6e73;
pub(crate) const STREAM_SYNTH: u64 = 0x7379_6e74;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a key path.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub(crate) fn rng_for(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

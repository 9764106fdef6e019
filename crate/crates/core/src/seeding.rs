//! Deterministic per-trial seed derivation.
//!
//! Every Monte Carlo trial gets its own generator seeded from
//! `(master_seed, tag, index)`, so results do not depend on how trials are
//! spread over worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// SplitMix64 finalizer. A bijection on `u64`.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for trial `index` of the experiment stream named `tag`.
///
/// For a fixed `(master_seed, tag)` the map `index -> seed` is injective.
pub fn derive_trial_seed(master_seed: u64, tag: &str, index: u64) -> u64 {
    let stream = mix64(master_seed ^ mix64(fnv1a(tag.as_bytes())));
    mix64(stream.wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

pub fn trial_rng(master_seed: u64, tag: &str, index: u64) -> TrialRng {
    TrialRng::seed_from_u64(derive_trial_seed(master_seed, tag, index))
}

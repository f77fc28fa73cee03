//! Deterministic random-stream derivation.
//!
//! Every source of randomness in the library draws from a [`ChaCha8Rng`]
//! whose seed is derived by hashing a base seed together with a list of
//! string labels (seed index, estimator id, purpose, ...). Streams with
//! different labels are independent for all practical purposes, so adding
//! or removing one consumer never perturbs another consumer's draws —
//! experiment runs stay replayable piece by piece.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over a byte slice, resumable from a prior state.
fn fnv1a_extend(mut state: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        state ^= u64::from(b);
        state = state.wrapping_mul(FNV_PRIME);
    }
    state
}

/// 64-bit FNV-1a hash of a byte slice.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    fnv1a_extend(FNV_OFFSET, bytes)
}

/// Derives a stream seed from a base seed and a sequence of labels.
///
/// Labels are hashed with a separator byte that cannot occur in UTF-8 text,
/// so `["ab", "c"]` and `["a", "bc"]` derive different streams.
pub fn derive_seed(base_seed: u64, labels: &[&str]) -> u64 {
    let mut state = fnv1a_extend(FNV_OFFSET, &base_seed.to_le_bytes());
    for label in labels {
        state = fnv1a_extend(state, &[0xff]);
        state = fnv1a_extend(state, label.as_bytes());
    }
    state
}

/// Builds the deterministic RNG stream for `(base_seed, labels)`.
pub fn stream(base_seed: u64, labels: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base_seed, labels))
}

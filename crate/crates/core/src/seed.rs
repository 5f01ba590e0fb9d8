//! Seed derivation for schedule-independent randomness.
//!
//! Every stochastic stage receives its own 64-bit seed derived from a master
//! seed plus a path of integer labels (kernel index, feature count, repeat,
//! matrix entry...). Streams are then drawn from ChaCha8, so results depend
//! only on the labels and never on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` and an ordered list of labels.
pub fn derive(master: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(mix(master), |acc, &label| mix(acc ^ mix(label)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stable numeric label for a string tag (FNV-1a).
pub fn label(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

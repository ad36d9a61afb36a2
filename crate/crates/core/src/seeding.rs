//! Deterministic seed derivation.
//!
//! Every random draw in the toolkit comes from a ChaCha stream seeded
//! through these helpers, so a run is a pure function of its master seed
//! regardless of thread count or work order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep independent consumers of the same master seed from
/// ever sharing a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    DefectParams,
    Noise,
    ModelInit,
    Shuffle,
    Dropout,
    TrainShuffle,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::DefectParams => 0x01,
            Domain::Noise => 0x02,
            Domain::ModelInit => 0x03,
            Domain::Shuffle => 0x04,
            Domain::Dropout => 0x05,
            Domain::TrainShuffle => 0x06,
        }
    }
}

/// splitmix64 finalizer; full-period mixing of a 64-bit state.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive an independent sub-seed for (master, domain, index).
pub fn derive_seed(master: u64, domain: Domain, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ domain.tag().rotate_left(32)) ^ index)
}

/// ChaCha stream for a derived seed. Identical on every platform.
pub fn stream(master: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, domain, index))
}

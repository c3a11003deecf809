//! Counter-based substreams. Every (seed, tag, a, b) tuple maps to its own
//! ChaCha8 stream, so results never depend on how work is split over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purposes a substream can be drawn for. Distinct tags never collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Tag {
    Carbon = 1,
    Fund = 2,
    Lifetime = 3,
    Inner = 4,
    Premium = 5,
    FeynmanKac = 6,
    Misc = 7,
    Bridge = 8,
    Ages = 9,
}

pub fn substream(seed: u64, tag: Tag, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(tag as u64).to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

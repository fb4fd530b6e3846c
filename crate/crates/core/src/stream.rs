//! Counter-derived random substreams.
//!
//! Every frame draws from its own generator seeded by a hash of
//! `(master seed, domain, scan index, frame index)`, so results do not depend
//! on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent purposes sharing one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Signal = 0x5349_474E,
    Dark = 0x4441_524B,
    Scan = 0x5343_414E,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_id(master_seed: u64, domain: Domain, scan_index: u64, frame_index: u64) -> u64 {
    let h = splitmix64(master_seed ^ (domain as u64).rotate_left(32));
    let h = splitmix64(h ^ scan_index);
    splitmix64(h ^ frame_index.rotate_left(17))
}

/// A seeded generator that remembers its provenance id.
#[derive(Debug, Clone)]
pub struct RngStream {
    pub id: u64,
    pub rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, domain: Domain, scan_index: u64, frame_index: u64) -> Self {
        Self::from_id(stream_id(master_seed, domain, scan_index, frame_index))
    }

    pub fn from_id(id: u64) -> Self {
        Self {
            id,
            rng: ChaCha8Rng::seed_from_u64(id),
        }
    }
}

//! Counter-based seed derivation.
//!
//! Every random draw in the workbench descends from one root seed. Child
//! seeds are a pure function of `(root, stream, index)` so records can be
//! generated in any order, on any number of threads, with identical output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type WorkbenchRng = ChaCha8Rng;

/// Independent sub-streams of a record's randomness.
pub mod stream {
    pub const RECORD: u64 = 1;
    pub const CHANNEL: u64 = 2;
    pub const IMPAIRMENT: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const PILOTS: u64 = 5;
    pub const MASK: u64 = 6;
    pub const SPLIT: u64 = 7;
    pub const LINK: u64 = 8;
    pub const SNR_POINT: u64 = 9;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(root: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(root) ^ stream.rotate_left(32)) ^ index)
}

pub fn rng(seed: u64) -> WorkbenchRng {
    ChaCha8Rng::seed_from_u64(seed)
}

//! Deterministic random substreams.
//!
//! A stream is addressed by `(seed, x, tau, role)`. Each address maps to its
//! own ChaCha stream, so the gates of a circuit do not depend on the order in
//! which they are requested, nor on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct roles at the same coordinates are independent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Role {
    Gate = 1,
    DressUPlus = 2,
    DressUMinus = 3,
    DressVPlus = 4,
    DressVMinus = 5,
    InitialState = 6,
    Operator = 7,
    Sample = 8,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The substream for space coordinate `x`, time coordinate `tau` and `role`.
pub fn substream(seed: u64, x: i64, tau: i64, role: Role) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let key = splitmix(splitmix(splitmix(x as u64) ^ (tau as u64)) ^ (role as u64));
    rng.set_stream(key);
    rng
}

//! Deterministic random streams.
//!
//! Every random object in the crate is drawn from a ChaCha8 generator. A
//! stream is identified by a master seed plus a `(namespace, index)` key:
//! the generator is seeded with `ChaCha8Rng::seed_from_u64(master)` and the
//! ChaCha stream id is set to `fnv1a64(namespace) ^ splitmix64(index)`.
//! ChaCha8 output is specified bit-for-bit, so codebooks rebuilt from the
//! same parameters are identical on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for the sub-stream `(namespace, index)` of `master`.
pub fn stream(master: u64, namespace: &str, index: i64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(fnv1a64(namespace.as_bytes()) ^ splitmix64(index as u64));
    rng
}

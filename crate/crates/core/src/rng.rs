//! Seed derivation for independent random substreams.
//!
//! Every random source in a simulation run draws from its own ChaCha8
//! stream. The stream seed is `splitmix64(master ^ splitmix64(stream_id))`,
//! so adding a new stream id never shifts the values seen by existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream id of the RF channel bit-error source.
pub const STREAM_CHANNEL: u64 = 1;
/// Stream id of the optional sensor quantization noise.
pub const STREAM_SENSOR_NOISE: u64 = 2;

/// One round of the SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of substream `stream_id` under `master`.
pub fn substream_seed(master: u64, stream_id: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream_id))
}

pub fn substream(master: u64, stream_id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(master, stream_id))
}

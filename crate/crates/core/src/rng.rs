use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream used for user placement.
pub const PLACEMENT_STREAM: u64 = 0;
/// Stream used for VBR trace generation.
pub const VIDEO_STREAM: u64 = 1;
/// Stream used for user mobility.
pub const MOBILITY_STREAM: u64 = 2;

/// Independent, reproducible RNG stream `stream` of run seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

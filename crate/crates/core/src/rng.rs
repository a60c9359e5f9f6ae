use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent RNG stream for replicate/chunk `index` under a run `seed`.
///
/// Streams depend only on `(seed, index)`, so results do not depend on how
/// replicates are scheduled across threads.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Stream family reserved for a named sub-step, so sub-steps seeded from the
/// same run seed never share a stream.
pub fn substream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    stream(seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15), index)
}

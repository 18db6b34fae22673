//! Seeded random streams.
//!
//! Every sampler in the crate takes an explicit `&mut SppRng`. Work that is
//! split across threads derives one stream per block of work from the same
//! 64-bit seed, so results do not depend on how many workers run it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SppRng = ChaCha8Rng;

/// Root stream for a seed.
pub fn seeded(seed: u64) -> SppRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> SppRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw on the half-open interval (0, 1].
pub(crate) fn open_closed_unit(rng: &mut SppRng) -> f64 {
    use rand::Rng;
    1.0 - rng.random::<f64>()
}

//! Seeded random streams.
//!
//! Every episode derives three independent ChaCha8 streams from its seed so
//! that swarm sampling, engine/sensor noise and policy randomness never
//! interleave. Changing how one consumer draws numbers cannot perturb the
//! others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const SETUP_STREAM: u64 = 0;
const ENGINE_STREAM: u64 = 1;
const POLICY_STREAM: u64 = 2;

fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator used by [`crate::scenario::sample_episode`].
pub fn setup_rng(seed: u64) -> SimRng {
    stream(seed, SETUP_STREAM)
}

/// Generator owned by the engine (sensor noise, labels, fire draws).
pub fn engine_rng(seed: u64) -> SimRng {
    stream(seed, ENGINE_STREAM)
}

/// Generator handed to policies during an episode.
pub fn policy_rng(seed: u64) -> SimRng {
    stream(seed, POLICY_STREAM)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Episode seed for `episode` within the batch seeded by `seed`.
pub fn episode_seed(seed: u64, episode: u64) -> u64 {
    splitmix64(seed ^ splitmix64(episode.wrapping_add(0x5EED)))
}

/// Draw an index from a discrete distribution given by `probs`.
///
/// Zero-probability entries are never returned, even when rounding leaves
/// the cumulative sum a hair short of one.
pub fn categorical<R: rand::Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last_positive = i;
        if u < acc {
            return i;
        }
    }
    last_positive
}

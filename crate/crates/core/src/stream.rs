//! Counter-style random streams keyed by `(seed, purpose, frame, node)`.
//!
//! Every node draws from its own stream in every frame, so adding or removing
//! a node never shifts the draws of the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for; separates otherwise identical keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Channel = 1,
    Initialization = 2,
    Welfare = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes several words into one seed.
pub fn mix(words: &[u64]) -> u64 {
    words.iter().fold(0x6a09_e667_f3bc_c908, |acc, &w| {
        splitmix64(acc ^ splitmix64(w))
    })
}

pub fn rng_for(seed: u64, purpose: Purpose, frame: u64, node: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, purpose as u64, frame]));
    rng.set_stream(node);
    rng
}

/// Streams for one frame of the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameStreams {
    pub seed: u64,
    pub frame: u64,
}

impl FrameStreams {
    pub fn new(seed: u64, frame: u64) -> Self {
        Self { seed, frame }
    }

    pub fn node(&self, node: usize) -> ChaCha8Rng {
        rng_for(self.seed, Purpose::Channel, self.frame, node as u64)
    }
}

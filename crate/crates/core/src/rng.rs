//! Keyed random streams.
//!
//! Every random draw in the crate comes from a stream identified by
//! `(seed, role, step, index)`. Streams are independent ChaCha8 generators
//! whose 256-bit key is derived from that tuple, so the value drawn for a
//! given particle at a given step never depends on evaluation order or on
//! how many other streams were consumed first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct roles never share a key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Role {
    Noise = 1,
    Minibatch = 2,
    Init = 3,
    Observation = 4,
    Fold = 5,
    Truth = 6,
    Perturbation = 7,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub role: Role,
    pub step: u64,
    pub index: u64,
}

impl StreamKey {
    pub fn new(seed: u64, role: Role, step: u64, index: u64) -> Self {
        StreamKey {
            seed,
            role,
            step,
            index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.seed ^ 0x6a09_e667_f3bc_c908;
        let mut key = [0u8; 32];
        let words = [self.role as u64, self.step, self.index, 0x5bd1_e995];
        for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
            state = splitmix64(state ^ splitmix64(w));
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

pub fn stream(seed: u64, role: Role, step: u64, index: u64) -> ChaCha8Rng {
    StreamKey::new(seed, role, step, index).rng()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

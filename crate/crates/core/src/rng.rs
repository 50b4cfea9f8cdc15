//! Deterministic per-operation random streams.
//!
//! Every random decision the engine makes draws from a stream keyed by
//! `(master_seed, generation, purpose, index)`. Streams are independent of
//! execution order, so parallel evaluation and resumed runs replay exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Initialize = 1,
    Select = 2,
    Crossover = 3,
    Mutate = 4,
    Evaluate = 5,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit key for one stream; also used as the training seed sent to workers.
pub fn stream_key(master_seed: u64, generation: u64, purpose: Purpose, index: u64) -> u64 {
    let mut state = master_seed;
    let mut key = splitmix64(&mut state);
    for word in [generation, purpose as u64, index] {
        state ^= word.wrapping_mul(0xd6e8_feb8_6659_fd93).wrapping_add(key);
        key = splitmix64(&mut state);
    }
    key
}

pub fn stream(master_seed: u64, generation: u64, purpose: Purpose, index: u64) -> StreamRng {
    let mut state = stream_key(master_seed, generation, purpose, index);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

//! Reproducible random streams.
//!
//! A master seed keys a ChaCha8 generator; each `(purpose, index)` pair
//! selects one of its 2^64 independent counter-based streams. Replica `r`
//! always reads the same stream no matter how many replicas run or which
//! worker handles it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RandomStream = ChaCha8Rng;

/// What a stream is used for; keeps service, arrival and bookkeeping draws
/// from ever overlapping.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    Services = 1,
    Arrivals = 2,
    Resampling = 3,
    Bootstrap = 4,
    Pilot = 5,
    Check = 6,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamFactory {
    key: [u8; 32],
}

const INDEX_BITS: u32 = 56;

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        let mut state = seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        Self { key }
    }

    /// Child factory for a nested context (a θ grid point, a block, ...).
    pub fn derive(&self, label: u64) -> Self {
        let mut state = u64::from_le_bytes(self.key[..8].try_into().unwrap())
            ^ u64::from_le_bytes(self.key[8..16].try_into().unwrap()).rotate_left(17)
            ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut key = self.key;
        for chunk in key.chunks_exact_mut(8) {
            let word = u64::from_le_bytes(chunk.try_into().unwrap()) ^ splitmix64(&mut state);
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        Self { key }
    }

    pub fn stream(&self, purpose: Purpose, index: u64) -> RandomStream {
        assert!(index < 1 << INDEX_BITS, "stream index {index} out of range");
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(((purpose as u64) << INDEX_BITS) | index);
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

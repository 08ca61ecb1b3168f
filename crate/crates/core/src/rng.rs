//! Deterministic per-record random streams.
//!
//! Every generated record owns its own ChaCha8 substream, derived from the
//! run seed and the record index. Generating any index range therefore gives
//! the same records as a single pass, which makes sharded generation and
//! concatenation byte-identical by construction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Base generator for a run. Clone-and-set-stream is cheaper than reseeding.
#[derive(Clone)]
pub struct StreamFactory {
    base: ChaCha8Rng,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        StreamFactory {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent substream for one record index.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(index);
        rng
    }
}

/// Inverse-CDF draw over cell weights in their fixed order. `u` must lie in
/// [0, 1); the final cell absorbs any floating-point shortfall.
pub fn sample_index(weights: &[f64], u: f64) -> usize {
    debug_assert!((0.0..1.0).contains(&u));
    let mut cum = 0.0;
    for (i, w) in weights.iter().enumerate() {
        cum += w;
        if u < cum {
            return i;
        }
    }
    weights.len() - 1
}

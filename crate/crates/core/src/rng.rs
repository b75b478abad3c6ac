//! Seeded, stream-splittable randomness.
//!
//! Every piece of randomness in the crate flows through an [`RngSeed`]: a
//! `(seed, stream)` pair that fully determines the generator state. Parallel
//! tasks derive their own stream instead of sharing a generator, so results
//! are reproducible regardless of scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// A `(seed, stream)` pair identifying one deterministic random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Same seed, different stream. Used to hand independent generators to
    /// parallel tasks (one stream per task).
    pub fn with_stream(self, stream: u64) -> Self {
        Self {
            seed: self.seed,
            stream,
        }
    }

    /// Instantiate the generator for this seed. Equal seeds give bit-identical
    /// sequences across runs and platforms.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

impl From<u64> for RngSeed {
    fn from(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }
}

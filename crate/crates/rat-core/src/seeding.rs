//! Counter-based fan-out of a master seed into independent named streams.
//!
//! Every consumer of randomness (init, shuffling, attack starts, region
//! sampling, evaluation) gets its own stream derived from the master seed,
//! a domain tag, and per-item counters. Enabling or disabling one consumer
//! therefore never perturbs the draws seen by another, and per-sample
//! streams make batch-parallel execution independent of thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domain tags. Values are part of the determinism contract.
pub mod domain {
    pub const INIT: u64 = 0x01;
    pub const SHUFFLE: u64 = 0x02;
    pub const ATTACK: u64 = 0x03;
    pub const ARS: u64 = 0x04;
    pub const EVAL: u64 = 0x05;
    pub const DATA: u64 = 0x06;
}

/// SplitMix64 finalizer; good avalanche for cheap counter mixing.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `master`, one mixing round per part.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

/// A seeded stream for the given domain and counters.
pub fn stream(master: u64, domain: u64, parts: &[u64]) -> ChaCha8Rng {
    let mut h = derive_seed(master, &[domain]);
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Stream directly from an already-derived seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Master seed of one run, with helpers for the streams the trainer uses.
#[derive(Debug, Clone, Copy)]
pub struct RunSeeds {
    master: u64,
}

impl RunSeeds {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Stream for model parameter initialization.
    pub fn init_rng(&self) -> ChaCha8Rng {
        stream(self.master, domain::INIT, &[])
    }

    /// Seed fed to the epoch-shuffled batcher.
    pub fn shuffle_seed(&self) -> u64 {
        derive_seed(self.master, &[domain::SHUFFLE])
    }

    /// Seed for dataset generation.
    pub fn data_seed(&self) -> u64 {
        derive_seed(self.master, &[domain::DATA])
    }

    /// Per-(step, sample) stream for attack random starts during training.
    pub fn attack_rng(&self, step: u64, sample: u64) -> ChaCha8Rng {
        stream(self.master, domain::ATTACK, &[step, sample])
    }

    /// Per-(step, sample) seed for attack random starts, as a raw u64.
    pub fn attack_seed(&self, step: u64, sample: u64) -> u64 {
        derive_seed(self.master, &[domain::ATTACK, step, sample])
    }

    /// Per-(step, sample) stream for region-sampler draws.
    pub fn ars_rng(&self, step: u64, sample: u64) -> ChaCha8Rng {
        stream(self.master, domain::ARS, &[step, sample])
    }

    /// Base seed for evaluation attacks; eval derives per-sample streams itself.
    pub fn eval_seed(&self) -> u64 {
        derive_seed(self.master, &[domain::EVAL])
    }
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random number generator used for all simulation draws.
pub type SimRng = ChaCha8Rng;

/// Which part of a replication a substream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    First = 0,
    Second = 1,
    /// Test covariates drawn when evaluating a decision rule.
    Covariates = 2,
}

/// Independent RNG substreams for one macro-replication.
///
/// Each `(alternative, design point, stage)` triple gets its own ChaCha
/// stream, so the samples a procedure sees do not depend on the order in
/// which `(i, j)` cells are visited or on how many workers visit them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Substreams {
    key: u64,
}

impl Substreams {
    pub fn new(master_seed: u64, replication: u64) -> Self {
        Self {
            key: splitmix64(master_seed ^ splitmix64(replication.wrapping_add(0x9e37_79b9_7f4a_7c15))),
        }
    }

    pub fn stream(&self, alternative: usize, point: usize, stage: Stage) -> SimRng {
        debug_assert!(alternative < 1 << 24 && point < 1 << 32);
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(((alternative as u64) << 40) | ((point as u64) << 8) | stage as u64);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Seeded, splittable random stream.
///
/// Equal `(seed, stream)` pairs replay identical sequences. Distinct stream
/// ids select independent ChaCha keystreams under the same key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

/// What a stream is used for inside one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum StreamPurpose {
    Contexts = 1,
    Environment = 2,
    Agent = 3,
    Offline = 4,
    Build = 5,
    Misspecification = 6,
    Probabilities = 7,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// Stream id for `(replication, agent slot, purpose)`.
    ///
    /// Layout: replication in the high 40 bits, agent slot in the next 16,
    /// purpose in the low 8.
    pub fn replication(seed: u64, rep: usize, agent: usize, purpose: StreamPurpose) -> Self {
        let id = ((rep as u64) << 24) | ((agent as u64 & 0xffff) << 8) | purpose as u64;
        Self::new(seed, id)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

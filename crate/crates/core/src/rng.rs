//! Seeded, label-derived random streams.
//!
//! Every random draw in the library comes from an [`RngStream`]. A stream is
//! identified by a master seed plus a path of component labels, so a trial's
//! randomness does not depend on scheduling or on how many draws other
//! components made.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: String,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: impl Into<String>) -> Self {
        let stream_id = stream_id.into();
        let rng = ChaCha8Rng::from_seed(derive_key(master_seed, &stream_id));
        RngStream {
            master_seed,
            stream_id,
            rng,
        }
    }

    /// Child stream keyed by `(label, index)` under this stream's path.
    ///
    /// The child depends only on the master seed and the full path, never on
    /// how far the parent has advanced.
    pub fn derive(&self, label: &str, index: u64) -> RngStream {
        RngStream::new(
            self.master_seed,
            format!("{}/{}:{}", self.stream_id, label, index),
        )
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> &str {
        &self.stream_id
    }
}

fn derive_key(master_seed: u64, stream_id: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update(stream_id.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    key
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

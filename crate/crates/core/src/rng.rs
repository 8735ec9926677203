//! Deterministic random streams derived from a single root seed.
//!
//! Each component (data, init, latent, pairing, ...) draws from its own named
//! ChaCha stream, so changing how much randomness one component consumes never
//! perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Returns the stream registered under `name`.
    pub fn stream(&self, name: &str) -> Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(fnv1a(name.as_bytes()));
        rng
    }

    /// A sub-stream for the `index`-th member of a family (e.g. one per class).
    pub fn indexed(&self, name: &str, index: u64) -> Rng {
        let mut rng =
            ChaCha8Rng::seed_from_u64(self.seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        rng.set_stream(fnv1a(name.as_bytes()));
        rng
    }
}

/// Seeded generator for call sites that only need one stream.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

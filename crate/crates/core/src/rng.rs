//! Seeded random streams.
//!
//! A `(master, stream)` pair names an independent ChaCha8 stream. Replication
//! `r` of an experiment uses `stream = r`, so any replication can be rebuilt
//! without generating the ones before it. Different consumers inside one
//! replication (graph edges, degree parameters, clustering restarts) draw from
//! separate keys derived from a [`Domain`] tag.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngSeed {
    pub master: u64,
    pub stream: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Graph,
    Theta,
    Clustering,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Graph => 0x0067_7261_7068,
            Domain::Theta => 0x0074_6865_7461,
            Domain::Clustering => 0x0063_6c75_7374,
        }
    }
}

impl RngSeed {
    pub fn new(master: u64, stream: u64) -> Self {
        Self { master, stream }
    }

    pub fn rng(&self, domain: Domain) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.master ^ splitmix64(domain.tag())));
        rng.set_stream(self.stream);
        rng
    }

    /// A 64-bit seed for downstream consumers that take a plain `u64`.
    pub fn derive_u64(&self, domain: Domain) -> u64 {
        splitmix64(splitmix64(self.master ^ domain.tag()) ^ self.stream.rotate_left(29))
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for the `index`-th sub-task of a seeded computation.
pub fn sub_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
    rng.set_stream(index);
    rng
}

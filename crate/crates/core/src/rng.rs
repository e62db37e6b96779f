//! Seed splitting.
//!
//! Every random quantity is drawn from a ChaCha8 generator keyed by the run seed
//! and positioned on its own stream, so trial `t`'s channel never depends on how
//! many trials ran before it or on which worker drew it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Human-readable description of the scheme, recorded in run manifests.
pub const SCHEME: &str = "ChaCha8Rng::seed_from_u64(seed) with set_stream(tag << 48 | index); \
                          tags: 1 = channel draw, 2 = pilot noise, 3 = bound-check configuration";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Channel realisation for one trial.
    Channel(u64),
    /// Pilot noise for one trial.
    Noise(u64),
    /// One configuration of the bound-dominance suite.
    BoundCheck(u64),
}

impl Stream {
    fn id(self) -> u64 {
        const INDEX_MASK: u64 = (1 << 48) - 1;
        let (tag, index) = match self {
            Stream::Channel(i) => (1u64, i),
            Stream::Noise(i) => (2, i),
            Stream::BoundCheck(i) => (3, i),
        };
        (tag << 48) | (index & INDEX_MASK)
    }
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

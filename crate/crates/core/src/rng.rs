//! Named random sub-streams derived from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Placement,
    Traffic,
    Loss,
    Mobility(u32),
    Hello(u32),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Placement => 1,
            Stream::Traffic => 2,
            Stream::Loss => 3,
            Stream::Mobility(n) => (1 << 32) | u64::from(n),
            Stream::Hello(n) => (2 << 32) | u64::from(n),
        }
    }
}

pub fn substream(master_seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream.id());
    rng
}

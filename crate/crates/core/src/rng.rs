//! Seed fan-out.
//!
//! One master seed feeds several named streams so that changing how much
//! randomness one component consumes never shifts another component's draws.
//! Streams are ChaCha8 generators keyed by `(master seed, stream id)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

/// Named randomness consumers of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Env,
    PolicyInit,
    GanInit,
    Rollout,
    GanNoise,
    GoalSampling,
    Evaluation,
    /// Extra rollouts spent only on estimating goal difficulty.
    Labeling,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Env => 1,
            Stream::PolicyInit => 2,
            Stream::GanInit => 3,
            Stream::Rollout => 4,
            Stream::GanNoise => 5,
            Stream::GoalSampling => 6,
            Stream::Evaluation => 7,
            Stream::Labeling => 8,
        }
    }
}

/// Source of per-stream generators derived from one master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStreams {
    master: u64,
}

impl SeedStreams {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn stream(&self, stream: Stream) -> Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(stream.id());
        rng
    }
}

/// Generator for one item (episode, candidate, ...) of a batch.
///
/// Batches draw a single `batch_seed` from their parent stream and then give
/// each item its own ChaCha stream, so results do not depend on how items
/// are scheduled across workers.
pub fn item_rng(batch_seed: u64, index: usize) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(batch_seed);
    rng.set_stream(index as u64);
    rng
}

pub fn next_seed(rng: &mut Rng) -> u64 {
    rng.next_u64()
}

#[inline]
pub fn standard_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

//! Seeded random streams.
//!
//! Every randomized step draws from its own ChaCha stream, keyed by the run
//! seed plus an index and selected by a fixed stream id. Two consumers never
//! share a generator, so adding draws in one place cannot shift another.

use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    EncoderInit = 1,
    DiscriminatorInit = 2,
    EncoderShuffle = 3,
    DiscriminatorShuffle = 4,
    Synth = 5,
    Balance = 6,
    Probe = 7,
}

/// Generator for `stream`, seeded with `seed + index` (wrapping).
pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index));
    rng.set_stream(stream as u64);
    rng
}

/// A uniformly shuffled `0..n` for one epoch.
pub fn epoch_permutation(n: usize, seed: u64, stream: Stream, epoch: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream_rng(seed, stream, epoch));
    idx
}

//! Deterministic random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream keyed by
//! `(seed, stream id)`. Work is cut into fixed-size blocks, each with its own
//! stream, so results depend only on the seed and never on how many worker
//! threads processed the blocks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

/// Items handled by one stream.
pub const BLOCK_SIZE: usize = 4096;

/// Stream namespaces. The high 16 bits of a stream id carry the tag.
pub mod tags {
    pub const NU_SAMPLES: u16 = 1;
    pub const ENERGY_PAIRS: u16 = 2;
    pub const LABELINGS: u16 = 3;
    pub const GRAPH_PAIRS: u16 = 4;
    pub const PAIR_SELECTION: u16 = 5;
    pub const NU_ENERGY: u16 = 6;
    pub const FUBINI: u16 = 7;
}

pub fn stream(seed: u64, tag: u16, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((tag as u64) << 48) | (index & 0xFFFF_FFFF_FFFF));
    rng
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for sub-experiment `index` under `tag`.
pub fn derive_seed(seed: u64, tag: u16, index: u64) -> u64 {
    mix64(mix64(seed ^ ((tag as u64) << 48)).wrapping_add(mix64(index ^ 0x9E37_79B9_7F4A_7C15)))
}

/// Worker count for the parallel estimators. Recorded in every report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partitioning {
    pub partitions: usize,
}

impl Default for Partitioning {
    fn default() -> Self {
        Self { partitions: 1 }
    }
}

impl Partitioning {
    pub fn new(partitions: usize) -> Self {
        Self {
            partitions: partitions.max(1),
        }
    }

    /// Runs `f` over `n` items split into blocks of [`BLOCK_SIZE`], returning
    /// per-block outputs in block order.
    pub fn run_blocks<T, F>(&self, seed: u64, tag: u16, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(std::ops::Range<usize>, &mut StreamRng) -> T + Sync + Send,
    {
        let blocks = n.div_ceil(BLOCK_SIZE);
        let job = |b: usize| {
            let lo = b * BLOCK_SIZE;
            let hi = (lo + BLOCK_SIZE).min(n);
            let mut rng = stream(seed, tag, b as u64);
            f(lo..hi, &mut rng)
        };
        if self.partitions <= 1 || blocks <= 1 {
            return (0..blocks).map(job).collect();
        }
        match rayon::ThreadPoolBuilder::new()
            .num_threads(self.partitions)
            .build()
        {
            Ok(pool) => pool.install(|| (0..blocks).into_par_iter().map(job).collect()),
            Err(_) => (0..blocks).map(job).collect(),
        }
    }

    /// Maps `f` over `0..n` in parallel, keeping index order.
    pub fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        if self.partitions <= 1 || n <= 1 {
            return (0..n).map(f).collect();
        }
        match rayon::ThreadPoolBuilder::new()
            .num_threads(self.partitions)
            .build()
        {
            Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
            Err(_) => (0..n).map(f).collect(),
        }
    }
}

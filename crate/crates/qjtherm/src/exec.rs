//! Seeded block execution for the samplers.
//!
//! Work is cut into fixed-size blocks; block `i` always draws from the
//! ChaCha stream `(seed, i)`. Per-block results are collected in block
//! order and folded sequentially, so output is bit-identical whether the
//! blocks run on one thread or across any number of rayon workers.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const DEFAULT_BLOCK: usize = 8192;

/// RNG for block `index` of a run with the given seed.
pub fn block_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

/// Splits `n_items` into blocks of at most `block` items, runs `work` on
/// each with its own RNG, and folds the per-block results in block order.
pub fn map_reduce_blocks<T, W, M>(n_items: usize, block: usize, seed: u64, work: W, merge: M) -> Option<T>
where
    T: Send,
    W: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
    M: FnMut(T, T) -> T,
{
    let n_blocks = n_items.div_ceil(block);
    let run_block = |i: usize| {
        let mut rng = block_rng(seed, i as u64);
        let len = block.min(n_items - i * block);
        work(&mut rng, len)
    };

    #[cfg(feature = "parallel")]
    let results: Vec<T> = (0..n_blocks).into_par_iter().map(run_block).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<T> = (0..n_blocks).map(run_block).collect();

    results.into_iter().reduce(merge)
}

/// Sequential reference path, always available; the parallel path must
/// produce bit-identical results.
pub fn map_reduce_blocks_seq<T, W, M>(n_items: usize, block: usize, seed: u64, work: W, merge: M) -> Option<T>
where
    W: Fn(&mut ChaCha8Rng, usize) -> T,
    M: FnMut(T, T) -> T,
{
    let n_blocks = n_items.div_ceil(block);
    (0..n_blocks)
        .map(|i| {
            let mut rng = block_rng(seed, i as u64);
            let len = block.min(n_items - i * block);
            work(&mut rng, len)
        })
        .reduce(merge)
}

//! Deterministic work splitting.
//!
//! Grids and path batches are cut into a fixed number of chunks that depends
//! only on the problem size, never on the worker count. An [`Executor`] maps
//! a function over the chunk indices and returns the results in index order;
//! callers reduce them in that order, so results are bit-stable no matter how
//! the chunks were scheduled. The core crate ships the sequential executor;
//! thread-pool executors live with the callers that have threads.

use alloc::vec::Vec;
use core::ops::Range;

pub trait Executor {
    /// Evaluates `f(0), …, f(n_chunks - 1)`, in any schedule, and returns the
    /// results ordered by chunk index.
    fn map_chunks<R, F>(&self, n_chunks: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync;
}

/// Runs every chunk on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_chunks<R, F>(&self, n_chunks: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync,
    {
        (0..n_chunks).map(f).collect()
    }
}

/// Fixed chunk count used by grid and path splitting.
pub const CHUNKS: usize = 8;

/// Splits `0..len` into at most [`CHUNKS`] contiguous ranges of near-equal
/// size. The split depends only on `len`.
pub fn chunk_ranges(len: usize) -> Vec<Range<usize>> {
    let n = CHUNKS.min(len.max(1));
    let base = len / n;
    let extra = len % n;
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        let size = base + usize::from(i < extra);
        out.push(start..start + size);
        start += size;
    }
    out
}

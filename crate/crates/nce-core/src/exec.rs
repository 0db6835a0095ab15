//! Pluggable execution strategy for the embarrassingly-parallel scoring
//! passes.
//!
//! Per-epoch prediction snapshots and neighborhood scoring apply a pure
//! function to every candidate index against immutable state. The executor
//! decides how that map runs; results always come back in index order, so
//! every downstream reduction is independent of the thread count. The
//! `nce-cli` crate provides a rayon-backed implementation.

use alloc::vec::Vec;

pub trait Executor {
    /// Applies `f` to each index in `0..n` and collects the results in index
    /// order.
    fn map_collect<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

/// Single-threaded reference executor.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_collect<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..n).map(f).collect()
    }
}

//! Pluggable evaluation of independent work items.
//!
//! Sweeps and cover certification hand batches of independent evaluations to
//! an [`Executor`]. Results always come back in index order, so reductions
//! over them are deterministic regardless of how the work was scheduled.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluates `f(0..len)` and returns the results in index order.
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

/// Runs everything on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..len).map(f).collect()
    }
}

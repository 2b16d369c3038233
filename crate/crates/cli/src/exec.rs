use lpvcert_core::exec::Executor;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuildError, ThreadPoolBuilder};

/// Executor backed by a dedicated rayon pool. Results keep index order, so
/// reports do not depend on the number of workers.
pub struct Parallel {
    pool: ThreadPool,
}

impl Parallel {
    /// `jobs = None` uses every available core.
    pub fn new(jobs: Option<usize>) -> Result<Self, ThreadPoolBuildError> {
        let mut b = ThreadPoolBuilder::new();
        if let Some(j) = jobs {
            b = b.num_threads(j.max(1));
        }
        Ok(Self { pool: b.build()? })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Parallel {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        let f = &f;
        self.pool.install(|| (0..len).into_par_iter().map(f).collect())
    }
}

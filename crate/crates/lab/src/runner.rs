//! Replication scheduling.
//!
//! Every replication draws from its own RNG stream, keyed by the master seed
//! and the replication index, so the set of per-replication results does not
//! depend on which worker ran what. Results come back in index order and are
//! reduced sequentially, which keeps floating-point sums identical between
//! serial and parallel runs.

use rayon::prelude::*;

use crate::error::LabResult;

/// Worker configuration; `jobs = 1` runs on the calling thread, `jobs = 0`
/// uses one worker per core.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Runner {
    pub jobs: usize,
}

impl Runner {
    pub fn serial() -> Self {
        Runner { jobs: 1 }
    }

    pub fn with_jobs(jobs: usize) -> Self {
        Runner { jobs }
    }

    /// `f(0), …, f(count - 1)`, in index order.
    pub fn map<T, F>(&self, count: usize, f: F) -> LabResult<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> LabResult<T> + Sync + Send,
    {
        if self.jobs == 1 {
            return (0..count).map(f).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new().num_threads(self.jobs).build()?;
        pool.install(|| (0..count).into_par_iter().map(&f).collect())
    }
}

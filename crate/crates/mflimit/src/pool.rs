use mflimit_core::diagnostics::Executor;
use rayon::prelude::*;

use crate::error::{CliError, Result};

/// A fixed-size worker pool. Jobs are independent and results come back in
/// index order, so output does not depend on the number of workers.
pub struct Pool {
    inner: rayon::ThreadPool,
}

impl Pool {
    pub fn new(workers: usize) -> Result<Self> {
        let inner = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .thread_name(|i| format!("mflimit-worker-{i}"))
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
        Ok(Self { inner })
    }

    pub fn workers(&self) -> usize {
        self.inner.current_num_threads()
    }
}

impl Executor for Pool {
    fn map<T: Send, F: Fn(usize) -> T + Sync>(&self, n: usize, job: F) -> Vec<T> {
        self.inner.install(|| (0..n).into_par_iter().map(&job).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_are_in_index_order() {
        let pool = Pool::new(3).unwrap();
        assert_eq!(pool.workers(), 3);
        assert_eq!(pool.map(100, |i| i * i), (0..100).map(|i| i * i).collect::<Vec<_>>());
    }
}

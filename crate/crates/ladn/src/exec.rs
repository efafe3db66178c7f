//! Thread-pool executor for the core's parallel maps.

use ladn_core::exec::Executor;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Runs work items on a dedicated Rayon pool; results keep input order.
#[derive(Debug)]
pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    /// `workers == 0` uses one thread per available core.
    pub fn new(workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(Pool { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Pool {
    fn map<T: Send, F: Fn(usize) -> T + Sync + Send>(&self, n: usize, f: F) -> Vec<T> {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_results() {
        let p = Pool::new(3).unwrap();
        assert_eq!(p.workers(), 3);
        assert_eq!(p.map(5, |i| i * i), vec![0, 1, 4, 9, 16]);
    }
}

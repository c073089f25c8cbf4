//! Thread-pool executor for per-sample gradient work.

use ddfas_core::predictor::backward::SampleGradient;
use ddfas_core::predictor::{Executor, SerialExecutor};
use rayon::prelude::*;

use crate::error::{HarnessError, Result};

/// Runs samples on a rayon pool. Results come back in index order, so the
/// reduction and therefore training are identical to the serial executor.
pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| HarnessError::Config(format!("field `threads`: {e}")))?;
        Ok(RayonExecutor { pool })
    }
}

impl Executor for RayonExecutor {
    fn map(&self, n: usize, job: &(dyn Fn(usize) -> SampleGradient + Sync)) -> Vec<SampleGradient> {
        self.pool.install(|| (0..n).into_par_iter().map(job).collect())
    }
}

/// Serial for one thread, a pool otherwise.
pub fn executor(threads: usize) -> Result<Box<dyn Executor>> {
    if threads <= 1 {
        Ok(Box::new(SerialExecutor))
    } else {
        Ok(Box::new(RayonExecutor::new(threads)?))
    }
}

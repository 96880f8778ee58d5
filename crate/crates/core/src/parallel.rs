//! Optional data parallelism with index-ordered results.
//!
//! Work items are mapped independently and collected in index order, so any
//! reduction the caller performs afterwards is identical for serial and
//! parallel execution.

use std::sync::Arc;

use rayon::prelude::*;

#[derive(Clone, Default)]
pub struct Workers {
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for Workers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Workers").field("threads", &self.threads()).finish()
    }
}

impl Workers {
    pub fn serial() -> Self {
        Workers { pool: None }
    }

    /// `threads == 0` means serial execution.
    pub fn new(threads: usize) -> Self {
        if threads == 0 {
            return Self::serial();
        }
        let pool =
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("failed to start worker threads");
        Workers { pool: Some(Arc::new(pool)) }
    }

    pub fn threads(&self) -> usize {
        self.pool.as_ref().map_or(0, |p| p.current_num_threads())
    }

    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match &self.pool {
            None => (0..n).map(f).collect(),
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
        }
    }
}

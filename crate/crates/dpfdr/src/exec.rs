use dpfdr_core::TrialExecutor;
use rayon::prelude::*;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "DPFDR_THREADS";

/// Runs trials on a dedicated rayon pool. Results come back in trial order,
/// so estimates do not depend on the number of workers.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    /// A pool with `threads` workers, or rayon's default when `None`.
    pub fn new(threads: Option<usize>) -> Self {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads.filter(|&n| n > 0) {
            builder = builder.num_threads(n);
        }
        Self {
            pool: builder.build().expect("failed to start the worker pool"),
        }
    }

    /// A pool sized by `DPFDR_THREADS` when it holds a positive integer.
    pub fn from_env() -> Self {
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok());
        Self::new(threads)
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl TrialExecutor for Parallel {
    fn map_trials<T: Send, F: Fn(u64) -> T + Sync + Send>(&self, trials: u64, f: F) -> Vec<T> {
        self.pool
            .install(|| (0..trials).into_par_iter().map(&f).collect())
    }
}

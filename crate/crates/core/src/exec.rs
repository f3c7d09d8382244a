//! Trial execution strategy for Monte-Carlo routines.

use alloc::vec::Vec;

/// Maps trial indices `0..trials` to results, returned in trial order.
///
/// Implementations may evaluate trials in any order or concurrently; callers
/// derive all randomness from the trial index, so the returned vector is the
/// same for every implementation.
pub trait TrialExecutor {
    fn map_trials<T, F>(&self, trials: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send;
}

/// Runs trials one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl TrialExecutor for Sequential {
    fn map_trials<T, F>(&self, trials: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        (0..trials).map(f).collect()
    }
}

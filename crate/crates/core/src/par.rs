//! Trial-level data parallelism with a sequential fallback.
//!
//! Every trial draws from its own stream `(seed, trial)`, so results do not
//! depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// `f(0..trials)` in trial order, on the rayon pool when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn map_trials<T: Send>(trials: u64, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..trials).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_trials<T: Send>(trials: u64, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    map_trials_seq(trials, f)
}

/// Caps the global worker pool. Only the first call takes effect.
#[cfg(feature = "parallel")]
pub fn configure_threads(threads: usize) -> bool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .is_ok()
}

#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_threads: usize) -> bool {
    true
}

/// Always-sequential variant of [`map_trials`].
pub fn map_trials_seq<T>(trials: u64, f: impl Fn(u64) -> T) -> Vec<T> {
    (0..trials).map(f).collect()
}

/// Number of trials for which `f` holds, stopping at the first error.
pub fn count_trials<E: Send>(
    trials: u64,
    f: impl Fn(u64) -> Result<bool, E> + Sync + Send,
) -> Result<u64, E> {
    map_trials(trials, f)
        .into_iter()
        .try_fold(0u64, |acc, r| Ok(acc + r? as u64))
}

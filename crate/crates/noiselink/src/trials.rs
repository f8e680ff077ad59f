//! Embarrassingly parallel Monte-Carlo trial execution.
//!
//! Every trial is keyed by its index so results are independent of execution
//! order and thread count: `run` and `run_sequential` return identical
//! vectors for the same closure. With the `parallel` feature (on by
//! default) `run` fans out over rayon's global pool; without it, `run` is
//! an alias for the sequential path.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Run `n` trials of `f`, collecting results in trial order.
#[cfg(feature = "parallel")]
pub fn run<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Run `n` trials of `f`, collecting results in trial order.
#[cfg(not(feature = "parallel"))]
pub fn run<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    run_sequential(n, f)
}

/// Single-threaded reference path; always available regardless of features.
pub fn run_sequential<T, F>(n: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::receiver_model::{mean_square, rng_for, synthesize_with};

    #[test]
    fn parallel_and_sequential_agree_exactly() {
        let work = |t: u64| {
            let mut rng = rng_for(42, t);
            let stream = synthesize_with(1.0, 256, 1000.0, &mut rng).unwrap();
            mean_square(&stream)
        };
        let par = run(500, work);
        let seq = run_sequential(500, work);
        assert_eq!(par, seq);
    }

    #[test]
    fn results_arrive_in_trial_order() {
        let out = run(100, |t| t * t);
        for (i, &v) in out.iter().enumerate() {
            assert_eq!(v, (i as u64) * (i as u64));
        }
    }
}

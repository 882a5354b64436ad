//! Worker-pool plumbing shared by the Monte Carlo and sweep code.
//!
//! Trials are partitioned into fixed-size chunks with per-chunk derived RNG
//! streams and merged in chunk order, so results are bit-identical whether
//! they run on one thread or many and whether the `parallel` feature (rayon)
//! is enabled or the sequential fallback is compiled in.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Trials per RNG stream for counting-style Monte Carlo loops.
pub const TRIAL_CHUNK: u64 = 8192;

/// Derives the RNG for one chunk of work: same 256-bit key, distinct stream.
pub fn chunk_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a salt into a base seed (splitmix64 finalizer) so nested loops get
/// independent streams.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Splits `total` into `(chunk_index, len)` pieces of at most `chunk` each.
pub fn chunk_ranges(total: u64, chunk: u64) -> Vec<(u64, u64)> {
    assert!(chunk > 0);
    let mut out = Vec::with_capacity(total.div_ceil(chunk) as usize);
    let mut start = 0;
    let mut idx = 0;
    while start < total {
        let len = chunk.min(total - start);
        out.push((idx, len));
        start += len;
        idx += 1;
    }
    out
}

/// Order-preserving map over a slice; sequential reference path.
pub fn map_collect_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Order-preserving map over a slice on the rayon pool.
#[cfg(feature = "parallel")]
pub fn map_collect_par<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Order-preserving map over a slice; data-parallel when the `parallel`
/// feature is enabled, sequential otherwise. Output is identical either way.
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_collect_par(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_collect_seq(items, f)
    }
}

/// Sums `count_in_chunk(rng, trials_in_chunk)` over fixed chunks of `trials`.
/// The merge is a plain sum, so the pooled count does not depend on how the
/// chunks were scheduled.
pub fn count_over_trials<F>(seed: u64, trials: u64, count_in_chunk: F) -> u64
where
    F: Fn(&mut ChaCha12Rng, u64) -> u64 + Sync + Send,
{
    let chunks = chunk_ranges(trials, TRIAL_CHUNK);
    map_collect(&chunks, |&(idx, len)| {
        let mut rng = chunk_rng(seed, idx);
        count_in_chunk(&mut rng, len)
    })
    .into_iter()
    .sum()
}

/// Sequential twin of [`count_over_trials`]; produces the same count.
pub fn count_over_trials_seq<F>(seed: u64, trials: u64, count_in_chunk: F) -> u64
where
    F: Fn(&mut ChaCha12Rng, u64) -> u64,
{
    let chunks = chunk_ranges(trials, TRIAL_CHUNK);
    chunks
        .iter()
        .map(|&(idx, len)| {
            let mut rng = chunk_rng(seed, idx);
            count_in_chunk(&mut rng, len)
        })
        .sum()
}

/// Runs `f` on a rayon pool with `workers` threads (0 = rayon's default).
/// Without the `parallel` feature the closure runs on the calling thread.
#[cfg(feature = "parallel")]
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("failed to build worker pool")
            .install(f)
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<R: Send>(_workers: usize, f: impl FnOnce() -> R + Send) -> R {
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunking_covers_everything_once() {
        for total in [0u64, 1, 100, TRIAL_CHUNK, TRIAL_CHUNK + 1, 3 * TRIAL_CHUNK + 7] {
            let chunks = chunk_ranges(total, TRIAL_CHUNK);
            assert_eq!(chunks.iter().map(|&(_, l)| l).sum::<u64>(), total);
            for (i, &(idx, len)) in chunks.iter().enumerate() {
                assert_eq!(idx, i as u64);
                assert!(len > 0 && len <= TRIAL_CHUNK);
            }
        }
    }

    #[test]
    fn pooled_count_matches_sequential() {
        use rand::Rng;
        let f = |rng: &mut ChaCha12Rng, n: u64| -> u64 {
            (0..n).filter(|_| rng.random::<f64>() < 0.3).count() as u64
        };
        let a = count_over_trials(99, 50_000, f);
        let b = count_over_trials_seq(99, 50_000, f);
        assert_eq!(a, b);
    }

    #[test]
    fn derived_seeds_differ() {
        let s: Vec<u64> = (0..100).map(|i| derive_seed(7, i)).collect();
        let mut sorted = s.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), s.len());
    }
}

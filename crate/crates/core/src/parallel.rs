//! Scoped-thread map with a deterministic output order.

use std::num::NonZeroUsize;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "SPECTRAL_EMBED_THREADS";

/// Worker count: `SPECTRAL_EMBED_THREADS` if set to a positive integer,
/// otherwise the available parallelism.
pub fn thread_count() -> usize {
    let avail = std::thread::available_parallelism().map_or(1, NonZeroUsize::get);
    match std::env::var(THREADS_ENV).ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        Some(n) if n > 0 => n,
        _ => avail,
    }
}

/// `(0..len).map(f)` evaluated on up to `thread_count()` threads.
/// Results are in index order regardless of the thread count.
pub fn par_map<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = thread_count().min(len.max(1));
    if threads <= 1 {
        return (0..len).map(f).collect();
    }
    let chunk = len.div_ceil(threads);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|c| {
                let lo = (c * chunk).min(len);
                let hi = ((c + 1) * chunk).min(len);
                s.spawn(move || (lo..hi).map(f).collect::<Vec<T>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

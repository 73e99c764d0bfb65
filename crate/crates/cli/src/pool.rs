//! Scoped-thread executor.
//!
//! Chunks are assigned round-robin by index and the results are written into
//! index-ordered slots, so the caller's reduction order (and therefore every
//! bit of the output) is independent of the worker count.

use masep_core::exec::Executor;

pub struct ThreadPool {
    workers: usize,
}

impl ThreadPool {
    pub fn new(workers: usize) -> Self {
        ThreadPool {
            workers: workers.max(1),
        }
    }

    /// `MASEP_WORKERS` overrides, then an explicit config value, then the
    /// machine parallelism.
    pub fn from_env(config_workers: Option<usize>) -> Self {
        let workers = std::env::var("MASEP_WORKERS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&w| w >= 1)
            .or(config_workers)
            .unwrap_or_else(|| {
                std::thread::available_parallelism()
                    .map(|n| n.get())
                    .unwrap_or(1)
            });
        ThreadPool::new(workers)
    }
}

impl Executor for ThreadPool {
    fn map_chunks<R, F>(&self, n_chunks: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync,
    {
        let workers = self.workers.min(n_chunks.max(1));
        if workers <= 1 {
            return (0..n_chunks).map(f).collect();
        }
        let mut slots: Vec<Option<R>> = (0..n_chunks).map(|_| None).collect();
        std::thread::scope(|scope| {
            let f = &f;
            let handles: Vec<_> = (0..workers)
                .map(|wi| {
                    scope.spawn(move || {
                        let mut out = Vec::new();
                        let mut i = wi;
                        while i < n_chunks {
                            out.push((i, f(i)));
                            i += workers;
                        }
                        out
                    })
                })
                .collect();
            for handle in handles {
                for (i, r) in handle.join().expect("worker panicked") {
                    slots[i] = Some(r);
                }
            }
        });
        slots.into_iter().map(|s| s.expect("chunk computed")).collect()
    }
}

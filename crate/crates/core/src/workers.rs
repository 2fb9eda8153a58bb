//! Minimal scoped worker pool.
//!
//! Work items are dealt round-robin to a fixed number of scoped threads and
//! results come back in item order. With one worker everything runs inline on
//! the calling thread, which is also the path taken on targets without
//! threads.

/// Environment variable that overrides the configured worker count.
pub const WORKERS_ENV: &str = "ECTFEM_WORKERS";

/// Worker count from the environment override, if set and valid.
pub fn env_workers() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Apply `f` to every item using `workers` threads; output order matches
/// input order. Item `i` is processed by worker `i % workers`.
pub fn map_round_robin<T, R, F>(items: Vec<T>, workers: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(usize, T) -> R + Sync,
{
    let n = items.len();
    let workers = workers.max(1).min(n.max(1));
    if workers == 1 || cfg!(target_arch = "wasm32") {
        return items.into_iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let mut buckets: Vec<Vec<(usize, T)>> = (0..workers).map(|_| Vec::new()).collect();
    for (i, t) in items.into_iter().enumerate() {
        buckets[i % workers].push((i, t));
    }
    let f = &f;
    let mut slots: Vec<Option<R>> = (0..n).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = buckets
            .into_iter()
            .map(|bucket| {
                s.spawn(move || {
                    bucket
                        .into_iter()
                        .map(|(i, t)| (i, f(i, t)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker thread panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|r| r.expect("missing result")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_preserved() {
        let out = map_round_robin((0..37).collect(), 4, |i, x: usize| {
            assert_eq!(i, x);
            x * x
        });
        assert_eq!(out, (0..37).map(|x| x * x).collect::<Vec<_>>());
    }

    #[test]
    fn empty_input() {
        let out: Vec<u8> = map_round_robin(Vec::<u8>::new(), 3, |_, x| x);
        assert!(out.is_empty());
    }
}

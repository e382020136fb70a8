//! Index-ordered maps over work items, data-parallel with the `parallel`
//! feature and sequential otherwise. Results always come back in input order.

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "RDMFT_QFI_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `Parallel` degrades to `Sequential` when built without the feature.
    pub fn effective(self) -> Self {
        if cfg!(feature = "parallel") {
            self
        } else {
            Execution::Sequential
        }
    }
}

pub fn map_indexed<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    map_indexed_with(Execution::default(), items, f)
}

pub fn map_indexed_with<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    match exec.effective() {
        Execution::Sequential => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
        Execution::Parallel => parallel_map(items, f),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(usize, &T) -> R,
{
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Worker cap from [`THREADS_ENV`]; `None` when unset or not a positive integer.
pub fn thread_cap_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

/// Runs `f` with at most `threads` workers (hardware default for `None`).
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = threads {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                return pool.install(f);
            }
        }
    }
    let _ = threads;
    f()
}

/// Deterministic per-item seed derived from a run seed (splitmix64 step).
pub fn item_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<usize> = (0..1000).collect();
        let seq = map_indexed_with(Execution::Sequential, &items, |i, &x| i * x);
        let par = map_indexed_with(Execution::Parallel, &items, |i, &x| i * x);
        assert_eq!(seq, par);
        let capped = with_threads(Some(2), || map_indexed(&items, |i, &x| i + x));
        assert_eq!(capped[999], 1998);
    }

    #[test]
    fn seeds_differ_per_item() {
        assert_ne!(item_seed(1, 0), item_seed(1, 1));
        assert_eq!(item_seed(7, 3), item_seed(7, 3));
    }
}

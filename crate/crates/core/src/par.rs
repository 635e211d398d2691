//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the maps below run on rayon's pool unless the
//! process-wide mode has been switched to [`Mode::Sequential`]. Without the
//! feature they are plain iterator maps. Output order always matches input
//! order, so merged results are deterministic either way.

use std::sync::atomic::{AtomicU8, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sequential,
    Parallel,
}

static MODE: AtomicU8 = AtomicU8::new(1);

pub fn set_mode(mode: Mode) {
    MODE.store(matches!(mode, Mode::Parallel) as u8, Ordering::SeqCst);
}

/// The effective mode. Always `Sequential` when built without `parallel`.
pub fn mode() -> Mode {
    if cfg!(feature = "parallel") && MODE.load(Ordering::SeqCst) == 1 {
        Mode::Parallel
    } else {
        Mode::Sequential
    }
}

/// Size the global worker pool. `jobs == 1` also switches to sequential mode.
/// Returns false if the pool was already initialised with another size.
pub fn configure_jobs(jobs: usize) -> bool {
    if jobs == 1 {
        set_mode(Mode::Sequential);
        return true;
    }
    set_mode(Mode::Parallel);
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        false
    }
}

pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode() == Mode::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode() == Mode::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// First index (in input order) whose result satisfies `stop`, together with
/// all results computed up to and including it. Later items may be skipped.
pub fn map_until<T, R, F, S>(items: &[T], f: F, stop: S) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
    S: Fn(&R) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode() == Mode::Parallel {
            use rayon::prelude::*;
            use std::sync::atomic::AtomicUsize;
            let first_hit = AtomicUsize::new(usize::MAX);
            let results: Vec<Option<R>> = items
                .par_iter()
                .enumerate()
                .map(|(i, x)| {
                    if i > first_hit.load(Ordering::Relaxed) {
                        return None;
                    }
                    let r = f(x);
                    if stop(&r) {
                        first_hit.fetch_min(i, Ordering::Relaxed);
                    }
                    Some(r)
                })
                .collect();
            let cut = first_hit.load(Ordering::SeqCst);
            return results
                .into_iter()
                .take(cut.saturating_add(1))
                .map(|r| r.expect("items before the first hit are always evaluated"))
                .collect();
        }
    }
    let mut out = Vec::new();
    for x in items {
        let r = f(x);
        let hit = stop(&r);
        out.push(r);
        if hit {
            break;
        }
    }
    out
}

//! Runtime switch between the rayon path and the sequential fallback.
//!
//! Kernels only ever parallelize over disjoint output slices; the arithmetic
//! inside each slice is identical on both paths, so flipping the switch (or
//! compiling without the `parallel` feature) never changes results bitwise.

use std::sync::atomic::{AtomicBool, Ordering};

static PARALLEL: AtomicBool = AtomicBool::new(true);

/// Below this many scalar operations a kernel stays sequential; rayon
/// dispatch overhead dominates for tiny tensors.
pub(crate) const PAR_WORK_THRESHOLD: usize = 16 * 1024;

/// Enable or disable the rayon path at runtime. A no-op when the crate is
/// built without the `parallel` feature.
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled, Ordering::Relaxed);
}

/// True when kernels will use rayon for large enough work items.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && PARALLEL.load(Ordering::Relaxed)
}

/// Apply `f` to each `chunk`-sized slice of `out` (the last slice may be
/// shorter), in parallel when the rayon path is active and the total work
/// is worth it. `work` should estimate the number of scalar operations.
pub(crate) fn for_each_chunk<T, F>(out: &mut [T], chunk: usize, work: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    debug_assert!(chunk > 0);
    #[cfg(feature = "parallel")]
    if parallel_enabled() && work >= PAR_WORK_THRESHOLD {
        use rayon::prelude::*;
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = work;
    for (i, c) in out.chunks_mut(chunk).enumerate() {
        f(i, c);
    }
}

//! Feature-gated data parallelism.
//!
//! Every parallel site in the crate maps independent items and collects the
//! results in index order, so the sequential fallback (built with
//! `--no-default-features`) produces bit-identical output.

#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Sequential map with the same signature, kept unconditionally so benches
/// can compare both dispatch paths in one build.
pub fn map_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// How many independent work items are worth materializing at once. Bounds
/// the memory held by in-flight gradient shards; has no effect on results,
/// which are always reduced in index order.
#[cfg(feature = "parallel")]
pub fn width() -> usize {
    rayon::current_num_threads().max(1) * 2
}

#[cfg(not(feature = "parallel"))]
pub fn width() -> usize {
    1
}

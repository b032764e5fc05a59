//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the helpers fan work out over the
//! rayon pool; without it they degrade to plain loops. Both paths produce
//! bit-identical results: work is split per index, outputs are collected in
//! index order, and no floating-point reduction crosses a split boundary.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Rows below this count are not worth a rayon dispatch.
const PAR_ROW_THRESHOLD: usize = 8;

/// Sizes the global rayon pool. Must run before any parallel work; later
/// calls fail. A no-op in sequential builds.
#[cfg(feature = "parallel")]
pub fn configure_thread_pool(threads: usize) -> std::result::Result<(), String> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

/// Sizes the global rayon pool. Must run before any parallel work; later
/// calls fail. A no-op in sequential builds.
#[cfg(not(feature = "parallel"))]
pub fn configure_thread_pool(_threads: usize) -> std::result::Result<(), String> {
    Ok(())
}

/// Maps `f` over `0..n`, preserving index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `f` over `0..n`, preserving index order.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indexed_seq(n, f)
}

/// Sequential twin of [`map_indexed`]; always available so the two paths can
/// be compared in tests and benches.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Applies `f(row_index, row)` to each `cols`-wide row of `out`.
///
/// Each row is written by exactly one task, so results do not depend on the
/// thread count. `par == false` forces the sequential path.
pub fn for_each_row<F>(out: &mut [f32], cols: usize, par: bool, f: F)
where
    F: Fn(usize, &mut [f32]) + Sync,
{
    debug_assert!(cols > 0 && out.len() % cols == 0);
    #[cfg(feature = "parallel")]
    {
        if par && out.len() / cols >= PAR_ROW_THRESHOLD {
            out.par_chunks_mut(cols)
                .enumerate()
                .for_each(|(i, row)| f(i, row));
            return;
        }
    }
    let _ = par;
    for (i, row) in out.chunks_mut(cols).enumerate() {
        f(i, row);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_matches_sequential() {
        let f = |i: usize| (i * i) as u64;
        assert_eq!(map_indexed(100, f), map_indexed_seq(100, f));
    }

    #[test]
    fn for_each_row_par_and_seq_agree() {
        let fill = |i: usize, row: &mut [f32]| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (i * 31 + j) as f32 * 0.25;
            }
        };
        let mut a = vec![0.0f32; 64 * 9];
        let mut b = vec![0.0f32; 64 * 9];
        for_each_row(&mut a, 9, true, fill);
        for_each_row(&mut b, 9, false, fill);
        assert_eq!(a, b);
    }
}

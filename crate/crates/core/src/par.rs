//! Data-parallel helpers. With the `parallel` feature these dispatch to rayon;
//! without it they run the same closures sequentially. Every helper produces
//! its output in index order so results do not depend on the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..n).map(f).collect()`.
pub(crate) fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Calls `f(index, chunk)` for each `chunk_len`-sized chunk of `data`,
/// stopping at the first error. The error reported is the lowest-indexed one.
pub(crate) fn try_for_each_chunk<T, E, F>(data: &mut [T], chunk_len: usize, f: F) -> Result<(), E>
where
    T: Send,
    E: Send,
    F: Fn(usize, &mut [T]) -> Result<(), E> + Sync + Send,
{
    if chunk_len == 0 {
        return Ok(());
    }
    #[cfg(feature = "parallel")]
    {
        let results: Vec<Result<(), E>> = data
            .par_chunks_mut(chunk_len)
            .enumerate()
            .map(|(i, c)| f(i, c))
            .collect();
        results.into_iter().collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk_len)
            .enumerate()
            .try_for_each(|(i, c)| f(i, c))
    }
}

/// Like [`try_for_each_chunk`] over two slices split into the same number of
/// chunks, returning the per-chunk values in order.
pub(crate) fn try_map_chunk_pairs<A, B, R, E, F>(
    a: &mut [A],
    a_len: usize,
    b: &mut [B],
    b_len: usize,
    f: F,
) -> Result<Vec<R>, E>
where
    A: Send,
    B: Send,
    R: Send,
    E: Send,
    F: Fn(usize, &mut [A], &mut [B]) -> Result<R, E> + Sync + Send,
{
    if a_len == 0 || b_len == 0 {
        return Ok(Vec::new());
    }
    #[cfg(feature = "parallel")]
    {
        let results: Vec<Result<R, E>> = a
            .par_chunks_mut(a_len)
            .zip(b.par_chunks_mut(b_len))
            .enumerate()
            .map(|(i, (x, y))| f(i, x, y))
            .collect();
        results.into_iter().collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        a.chunks_mut(a_len)
            .zip(b.chunks_mut(b_len))
            .enumerate()
            .map(|(i, (x, y))| f(i, x, y))
            .collect()
    }
}

/// Calls `f(index, item)` on every element.
pub(crate) fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    }
}

/// Whether the rayon backend is compiled in.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

//! Data-parallel helpers with a sequential fallback.
//!
//! All hot loops (per-node ODE updates, per-element assembly, dot products)
//! go through these functions. With the default `parallel` feature they run
//! on rayon; without it they degrade to plain iterators. The explicitly
//! sequential variants (`*_seq`) are always available so benchmarks can
//! compare both paths in one build.
//!
//! Determinism: every helper preserves element order. Reductions are done
//! by mapping fixed-size chunks in parallel and summing the per-chunk
//! results in order, so the floating-point result does not depend on the
//! number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length used for order-stable reductions.
const REDUCE_CHUNK: usize = 1024;

/// Apply `f` to every element of `items`, in place.
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(&mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter_mut().for_each(f);
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter_mut().for_each(f);
    }
}

/// Apply `f` to every (index, element) pair of `items`, in place.
pub fn for_each_mut_indexed<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, x)| f(i, x));
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    }
}

/// Map `f` over `items`, collecting results in input order.
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Map `f` over an index range, collecting results in order.
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
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

/// Sequentially map `f` over an index range (benchmark reference path).
pub fn map_range_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Order-stable dot product of two equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    #[cfg(feature = "parallel")]
    {
        if a.len() >= 4 * REDUCE_CHUNK {
            let partials: Vec<f64> = a
                .par_chunks(REDUCE_CHUNK)
                .zip(b.par_chunks(REDUCE_CHUNK))
                .map(|(ca, cb)| dot_seq(ca, cb))
                .collect();
            return partials.iter().sum();
        }
    }
    dot_seq(a, b)
}

/// Plain sequential dot product.
pub fn dot_seq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_seq_on_large_input() {
        let a: Vec<f64> = (0..10_000).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..10_000).map(|i| (i as f64).cos()).collect();
        // Chunked reduction must be bit-identical to the fixed chunk order,
        // independent of thread count.
        let d1 = dot(&a, &b);
        let d2 = dot(&a, &b);
        assert_eq!(d1.to_bits(), d2.to_bits());
        assert!((d1 - dot_seq(&a, &b)).abs() < 1e-9 * dot_seq(&a, &a).abs().max(1.0));
    }

    #[test]
    fn map_preserves_order() {
        let v: Vec<usize> = (0..5000).collect();
        let out = map_collect(&v, |x| x * 2);
        for (i, o) in out.iter().enumerate() {
            assert_eq!(*o, 2 * i);
        }
    }
}

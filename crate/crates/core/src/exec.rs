//! Execution helpers: data-parallel maps with a sequential fallback.
//!
//! Every parallel site in the crate is an indexed map into a fresh `Vec`, so
//! results land in deterministic slots and reductions happen afterwards in a
//! fixed order. Output is bit-identical with and without the `parallel`
//! feature.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..len`, preserving index order in the output.
#[cfg(feature = "parallel")]
pub fn map_indexed<T: Send, F: Fn(usize) -> T + Sync + Send>(len: usize, f: F) -> Vec<T> {
    (0..len).into_par_iter().map(f).collect()
}

/// Map `f` over `0..len`, preserving index order in the output.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F: Fn(usize) -> T>(len: usize, f: F) -> Vec<T> {
    map_indexed_seq(len, f)
}

/// Sequential map over `0..len`; kept available under all feature sets so
/// benchmarks can compare against the parallel path.
pub fn map_indexed_seq<T, F: Fn(usize) -> T>(len: usize, f: F) -> Vec<T> {
    (0..len).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let a = map_indexed(100, |i| (i as f64).sin());
        let b = map_indexed_seq(100, |i| (i as f64).sin());
        assert_eq!(a, b);
    }
}

//! Deterministic chunked parallelism.
//!
//! Every data-parallel pass splits the datapoints into fixed-size chunks,
//! computes one partial result per chunk, and folds the partials in chunk
//! order. The chunk size is a constant, so results are bitwise identical for
//! any worker count, and a single-threaded run produces the same bits as a
//! parallel one.

use rayon::prelude::*;
use std::ops::Range;

/// Datapoints per parallel work unit. Independent of the worker count.
pub(crate) const CHUNK_SIZE: usize = 1024;

pub(crate) fn n_chunks(n: usize) -> usize {
    n.div_ceil(CHUNK_SIZE)
}

pub(crate) fn chunk_range(chunk: usize, n: usize) -> Range<usize> {
    let start = chunk * CHUNK_SIZE;
    start..((start + CHUNK_SIZE).min(n))
}

/// Maps `f` over the chunk ranges of `0..n` in parallel and returns the
/// partials in chunk order.
pub(crate) fn par_map_chunks<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync,
{
    (0..n_chunks(n))
        .into_par_iter()
        .map(|c| f(chunk_range(c, n)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_cover_without_overlap() {
        let n = 2 * CHUNK_SIZE + 17;
        let mut seen = 0usize;
        for c in 0..n_chunks(n) {
            let r = chunk_range(c, n);
            assert_eq!(r.start, seen);
            seen = r.end;
        }
        assert_eq!(seen, n);
    }

    #[test]
    fn partials_arrive_in_chunk_order() {
        let n = 3 * CHUNK_SIZE + 5;
        let firsts = par_map_chunks(n, |r| r.start);
        let expected: Vec<usize> = (0..n_chunks(n)).map(|c| c * CHUNK_SIZE).collect();
        assert_eq!(firsts, expected);
    }
}

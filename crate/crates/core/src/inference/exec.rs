//! Data-parallel execution over particles.

use alloc::vec::Vec;

use crate::error::Result;

/// Runs per-particle work. Implementations may split the work across threads
/// but must hand every chunk a disjoint, contiguous range and return results
/// in item order; callers make every item's result depend only on its index,
/// so the outcome is the same for any split.
pub trait Executor: Sync {
    /// Splits `data` into chunks of whole `unit`-sized items, calls
    /// `f(first_item, chunk)` on each, and concatenates the returned vectors in
    /// item order. When several chunks fail, the error of the first failing
    /// chunk (in item order) is returned.
    fn map_chunks<T, R, F>(&self, data: &mut [T], unit: usize, f: F) -> Result<Vec<R>>
    where
        T: Send,
        R: Send,
        F: Fn(usize, &mut [T]) -> Result<Vec<R>> + Sync;
}

/// Everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_chunks<T, R, F>(&self, data: &mut [T], _unit: usize, f: F) -> Result<Vec<R>>
    where
        T: Send,
        R: Send,
        F: Fn(usize, &mut [T]) -> Result<Vec<R>> + Sync,
    {
        f(0, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_is_one_chunk() {
        let mut v = [1.0, 2.0, 3.0, 4.0];
        let out = Sequential
            .map_chunks(&mut v, 2, |first, chunk| {
                assert_eq!(first, 0);
                Ok(chunk.chunks(2).map(|c| c[0] + c[1]).collect())
            })
            .unwrap();
        assert_eq!(out, [3.0, 7.0]);
    }
}

use std::marker::PhantomData;

/// Shared view of a mutable slice for phases where every worker touches a disjoint set of
/// indices. Callers guarantee disjointness; nothing is checked at runtime.
#[derive(Clone, Copy)]
pub(crate) struct UnsafeSlice<'a, T> {
    ptr: *mut T,
    len: usize,
    _marker: PhantomData<&'a mut [T]>,
}

unsafe impl<T: Send> Send for UnsafeSlice<'_, T> {}
unsafe impl<T: Send> Sync for UnsafeSlice<'_, T> {}

impl<'a, T> UnsafeSlice<'a, T> {
    pub fn new(slice: &'a mut [T]) -> Self {
        Self { ptr: slice.as_mut_ptr(), len: slice.len(), _marker: PhantomData }
    }

    /// # Safety
    /// No other thread may access index `i` concurrently.
    pub unsafe fn write(&self, i: usize, value: T) {
        assert!(i < self.len);
        *self.ptr.add(i) = value;
    }

    /// # Safety
    /// No other thread may access `i` or `j` concurrently.
    pub unsafe fn swap(&self, i: usize, j: usize) {
        assert!(i < self.len && j < self.len);
        std::ptr::swap(self.ptr.add(i), self.ptr.add(j));
    }
}

/// Exclusive prefix sum computed block-wise: block totals first, then a serial scan over the
/// totals, then each block offsets its own entries. Returns the grand total.
pub(crate) fn exclusive_prefix_sum(values: &mut [u64], blocks: usize) -> u64 {
    use rayon::prelude::*;
    if values.is_empty() {
        return 0;
    }
    let chunk = values.len().div_ceil(blocks.max(1));
    let mut sums: Vec<u64> = values
        .par_chunks_mut(chunk)
        .map(|c| {
            let mut acc = 0;
            for v in c.iter_mut() {
                let x = *v;
                *v = acc;
                acc += x;
            }
            acc
        })
        .collect();
    let mut acc = 0;
    for s in sums.iter_mut() {
        let x = *s;
        *s = acc;
        acc += x;
    }
    values.par_chunks_mut(chunk).zip(sums.par_iter()).for_each(|(c, &base)| {
        for v in c {
            *v += base;
        }
    });
    acc
}

use crate::error::Result;
use crate::record::KeyOrder;

use super::{check_k, exhausted_error, precedes, RunSelector};

/// Binary min-heap of run indices keyed by their heads.
///
/// A replacement overwrites the root and sifts it down once rather than
/// popping and pushing, which never costs more comparisons than pop + insert.
pub struct HeapSelector<T, O> {
    heads: Vec<Option<T>>,
    heap: Vec<usize>,
    order: O,
    comparisons: u64,
}

impl<T, O: KeyOrder<T>> HeapSelector<T, O> {
    pub fn new(heads: Vec<Option<T>>, order: O) -> Result<Self> {
        check_k(heads.len())?;
        let heap = (0..heads.len()).filter(|&i| heads[i].is_some()).collect();
        let mut s = HeapSelector {
            heads,
            heap,
            order,
            comparisons: 0,
        };
        for i in (0..s.heap.len() / 2).rev() {
            s.sift_down(i);
        }
        Ok(s)
    }

    #[inline]
    fn less(&mut self, a: usize, b: usize) -> bool {
        self.comparisons += 1;
        let (ra, rb) = (self.heap[a], self.heap[b]);
        precedes(
            &self.order,
            self.heads[ra].as_ref().unwrap(),
            ra,
            self.heads[rb].as_ref().unwrap(),
            rb,
        )
    }

    fn sift_down(&mut self, mut pos: usize) {
        let n = self.heap.len();
        loop {
            let left = 2 * pos + 1;
            if left >= n {
                break;
            }
            let right = left + 1;
            let child = if right < n && self.less(right, left) {
                right
            } else {
                left
            };
            if self.less(child, pos) {
                self.heap.swap(child, pos);
                pos = child;
            } else {
                break;
            }
        }
    }

    #[cfg(test)]
    fn is_heap(&self) -> bool {
        (1..self.heap.len()).all(|i| {
            let (p, c) = (self.heap[(i - 1) / 2], self.heap[i]);
            !precedes(
                &self.order,
                self.heads[c].as_ref().unwrap(),
                c,
                self.heads[p].as_ref().unwrap(),
                p,
            )
        })
    }
}

impl<T, O: KeyOrder<T>> RunSelector<T> for HeapSelector<T, O> {
    fn k(&self) -> usize {
        self.heads.len()
    }

    fn live(&self) -> usize {
        self.heap.len()
    }

    fn winner(&mut self) -> Option<usize> {
        self.heap.first().copied()
    }

    fn head(&self, run: usize) -> Option<&T> {
        self.heads.get(run).and_then(Option::as_ref)
    }

    fn pop_and_replace(&mut self, next: Option<T>) -> Result<T> {
        let w = *self.heap.first().ok_or_else(exhausted_error)?;
        let exhausted = next.is_none();
        let out = std::mem::replace(&mut self.heads[w], next).unwrap();
        if exhausted {
            let last = self.heap.pop().unwrap();
            if !self.heap.is_empty() {
                self.heap[0] = last;
            }
        }
        self.sift_down(0);
        Ok(out)
    }

    fn comparisons(&self) -> u64 {
        self.comparisons
    }
}

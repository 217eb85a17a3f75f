//! Introspective sort: median-of-three quicksort that hands ranges over to
//! heapsort once recursion gets too deep, and to insertion sort when small.

use std::cmp::Ordering;

/// Ranges at or below this length are finished with insertion sort.
pub const INSERTION_SORT_THRESHOLD: usize = 16;

/// Quicksort may recurse `DEPTH_FACTOR * floor(log2 n)` levels before heapsort takes over.
pub const DEPTH_FACTOR: u32 = 2;

/// Sorts `v` in place. Not stable.
pub fn introsort<T, F>(v: &mut [T], mut cmp: F)
where
    F: FnMut(&T, &T) -> Ordering,
{
    if v.len() < 2 {
        return;
    }
    let depth = DEPTH_FACTOR * v.len().ilog2();
    sort_range(v, depth, &mut cmp);
}

fn sort_range<T, F>(mut v: &mut [T], mut depth: u32, cmp: &mut F)
where
    F: FnMut(&T, &T) -> Ordering,
{
    loop {
        let n = v.len();
        if n <= INSERTION_SORT_THRESHOLD {
            insertion_sort(v, cmp);
            return;
        }
        if depth == 0 {
            heapsort(v, cmp);
            return;
        }
        depth -= 1;
        let p = partition(v, cmp);
        let (left, right) = v.split_at_mut(p);
        let right = &mut right[1..];
        // recurse into the smaller side, iterate on the larger one
        if left.len() < right.len() {
            sort_range(left, depth, cmp);
            v = right;
        } else {
            sort_range(right, depth, cmp);
            v = left;
        }
    }
}

/// Moves the median of first, middle and last to index 0.
fn choose_pivot<T, F>(v: &mut [T], cmp: &mut F)
where
    F: FnMut(&T, &T) -> Ordering,
{
    let (a, b, c) = (0, v.len() / 2, v.len() - 1);
    let lt = |cmp: &mut F, v: &[T], x: usize, y: usize| cmp(&v[x], &v[y]) == Ordering::Less;
    let m = if lt(cmp, v, a, b) {
        if lt(cmp, v, b, c) {
            b
        } else if lt(cmp, v, a, c) {
            c
        } else {
            a
        }
    } else if lt(cmp, v, a, c) {
        a
    } else if lt(cmp, v, b, c) {
        c
    } else {
        b
    };
    v.swap(0, m);
}

/// Hoare-style partition around `v[0]`; scans stop on keys equal to the
/// pivot so runs of duplicates split evenly. Returns the pivot's final index.
fn partition<T, F>(v: &mut [T], cmp: &mut F) -> usize
where
    F: FnMut(&T, &T) -> Ordering,
{
    choose_pivot(v, cmp);
    let hi = v.len() - 1;
    let mut i = 0;
    let mut j = hi + 1;
    loop {
        loop {
            i += 1;
            if cmp(&v[i], &v[0]) != Ordering::Less || i == hi {
                break;
            }
        }
        loop {
            j -= 1;
            if cmp(&v[0], &v[j]) != Ordering::Less || j == 0 {
                break;
            }
        }
        if i >= j {
            break;
        }
        v.swap(i, j);
    }
    v.swap(0, j);
    j
}

pub(crate) fn insertion_sort<T, F>(v: &mut [T], cmp: &mut F)
where
    F: FnMut(&T, &T) -> Ordering,
{
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && cmp(&v[j], &v[j - 1]) == Ordering::Less {
            v.swap(j, j - 1);
            j -= 1;
        }
    }
}

pub(crate) fn heapsort<T, F>(v: &mut [T], cmp: &mut F)
where
    F: FnMut(&T, &T) -> Ordering,
{
    let n = v.len();
    for i in (0..n / 2).rev() {
        sift_down(v, i, n, cmp);
    }
    for end in (1..n).rev() {
        v.swap(0, end);
        sift_down(v, 0, end, cmp);
    }
}

fn sift_down<T, F>(v: &mut [T], mut root: usize, end: usize, cmp: &mut F)
where
    F: FnMut(&T, &T) -> Ordering,
{
    loop {
        let mut child = 2 * root + 1;
        if child >= end {
            return;
        }
        if child + 1 < end && cmp(&v[child], &v[child + 1]) == Ordering::Less {
            child += 1;
        }
        if cmp(&v[root], &v[child]) != Ordering::Less {
            return;
        }
        v.swap(root, child);
        root = child;
    }
}

//! Bitonic sorting network.

use super::array::TracedArray;
use super::word::{Cond, Select};

/// One compare-exchange of the network: after it runs, `lo` holds the
/// smaller element when `ascending`, the larger otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Comparator {
    pub lo: usize,
    pub hi: usize,
    pub ascending: bool,
}

/// Comparators of the bitonic network for a power-of-two `n`, in execution
/// order. The sequence depends on `n` alone.
pub fn bitonic_network(n: usize) -> impl Iterator<Item = Comparator> {
    assert!(n.is_power_of_two(), "bitonic network needs a power-of-two size");
    let stages = std::iter::successors(Some(2usize), move |&k| (k < n).then_some(k * 2))
        .filter(move |_| n >= 2)
        .flat_map(|k| std::iter::successors(Some(k / 2), |&j| (j > 1).then_some(j / 2)).map(move |j| (k, j)));
    stages.flat_map(move |(k, j)| {
        (0..n).filter_map(move |i| {
            let partner = i ^ j;
            (partner > i).then_some(Comparator { lo: i, hi: partner, ascending: i & k == 0 })
        })
    })
}

#[inline]
fn compare_exchange<T: Select>(arr: &mut TracedArray<T>, c: Comparator, less: &impl Fn(&T, &T) -> Cond) {
    let a = arr.read(c.lo);
    let b = arr.read(c.hi);
    let swap = if c.ascending { less(&b, &a) } else { less(&a, &b) };
    arr.write(c.lo, T::select(swap, &b, &a));
    arr.write(c.hi, T::select(swap, &a, &b));
}

/// Sorts `arr` ascending under the branch-free ordering `less`.
///
/// Non-power-of-two inputs are padded with `pad`, which must compare greater
/// than or equal to every real element, and truncated back afterwards; the
/// padded length is part of the public shape. The sort is not stable.
/// Returns the number of compare-exchanges performed.
pub fn osort_by<T: Select>(arr: &mut TracedArray<T>, pad: T, less: impl Fn(&T, &T) -> Cond) -> usize {
    let n = arr.len();
    if n < 2 {
        return 0;
    }
    let padded = n.next_power_of_two();
    arr.resize(padded, pad);
    let mut count = 0;
    for c in bitonic_network(padded) {
        compare_exchange(arr, c, &less);
        count += 1;
    }
    arr.resize(n, pad);
    count
}

/// [`osort_by`] for plain words, padding with the maximal key.
pub fn osort<W: super::Word + Select>(arr: &mut TracedArray<W>, max: W) -> usize {
    osort_by(arr, max, |a, b| super::oless(*a, *b))
}

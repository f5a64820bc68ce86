use std::mem::size_of;
use std::ops::Range;

use super::trace::{self, AccessKind, RegionId};
use super::word::{oequal, Select};

/// A contiguous array of fixed-width elements whose loads and stores are
/// reported to the active trace recorder.
///
/// Indices passed to [`read`](Self::read) and [`write`](Self::write) are
/// public: they show up in the trace. Secret indices must go through
/// [`oaccess_read`] / [`oaccess_write`].
#[derive(Clone, Debug)]
pub struct TracedArray<T> {
    region: RegionId,
    data: Vec<T>,
}

impl<T: Copy> TracedArray<T> {
    pub fn new(data: Vec<T>) -> Self {
        TracedArray { region: trace::next_region(), data }
    }

    pub fn filled(len: usize, value: T) -> Self {
        Self::new(vec![value; len])
    }

    pub fn region(&self) -> RegionId {
        self.region
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Element width in bytes.
    pub fn width(&self) -> usize {
        size_of::<T>()
    }

    /// Number of 64-byte granules spanned by the array.
    pub fn granules(&self) -> usize {
        (self.data.len() * self.width()).div_ceil(trace::GRANULE)
    }

    #[inline]
    fn span(&self, range: Range<usize>) -> (usize, usize) {
        (range.start * self.width(), range.end * self.width())
    }

    #[inline]
    pub fn read(&self, i: usize) -> T {
        let (lo, hi) = self.span(i..i + 1);
        trace::record_span(AccessKind::Read, self.region, lo, hi);
        self.data[i]
    }

    #[inline]
    pub fn write(&mut self, i: usize, value: T) {
        let (lo, hi) = self.span(i..i + 1);
        trace::record_span(AccessKind::Write, self.region, lo, hi);
        self.data[i] = value;
    }

    /// Reads a contiguous range, touching each granule once.
    #[inline]
    pub fn read_range(&self, range: Range<usize>) -> &[T] {
        let (lo, hi) = self.span(range.clone());
        trace::record_span(AccessKind::Read, self.region, lo, hi);
        &self.data[range]
    }

    #[inline]
    pub fn write_range(&mut self, start: usize, values: &[T]) {
        let (lo, hi) = self.span(start..start + values.len());
        trace::record_span(AccessKind::Write, self.region, lo, hi);
        self.data[start..start + values.len()].copy_from_slice(values);
    }

    /// Grows or shrinks to a public length; new slots are written with `fill`.
    pub fn resize(&mut self, len: usize, fill: T) {
        let old = self.data.len();
        if len > old {
            self.data.resize(len, fill);
            let (lo, hi) = self.span(old..len);
            trace::record_span(AccessKind::Write, self.region, lo, hi);
        } else {
            self.data.truncate(len);
        }
    }

    /// Untraced view of the contents, for declassified outputs and tests.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }
}

/// Reads `arr[index]` for a secret `index` by scanning every granule of the
/// array once and keeping the matching element with a conditional select.
#[inline]
pub fn oaccess_read<T: Select>(arr: &TracedArray<T>, index: usize) -> T {
    debug_assert!(index < arr.len(), "oaccess_read out of range");
    let (lo, hi) = arr.span(0..arr.len());
    trace::record_span(AccessKind::Read, arr.region, lo, hi);
    let mut acc = arr.data[0];
    for (k, v) in arr.data.iter().enumerate() {
        acc = T::select(oequal(k, index), v, &acc);
    }
    acc
}

/// Writes `arr[index] = value` for a secret `index`. Every granule is read
/// and rewritten; all other elements are rewritten with their own value.
#[inline]
pub fn oaccess_write<T: Select>(arr: &mut TracedArray<T>, index: usize, value: T) {
    debug_assert!(index < arr.len(), "oaccess_write out of range");
    let (lo, hi) = arr.span(0..arr.len());
    trace::record_rw_span(arr.region, lo, hi);
    for (k, slot) in arr.data.iter_mut().enumerate() {
        *slot = T::select(oequal(k, index), &value, slot);
    }
}

/// Row-granular [`oaccess_read`]: the array is viewed as rows of `stride`
/// elements and the whole of row `row` is returned into `out`.
pub fn oaccess_read_row<T: Select>(arr: &TracedArray<T>, row: usize, stride: usize, out: &mut [T]) {
    debug_assert_eq!(out.len(), stride);
    debug_assert!(stride > 0 && arr.len().is_multiple_of(stride));
    debug_assert!(row < arr.len() / stride, "oaccess_read_row out of range");
    let (lo, hi) = arr.span(0..arr.len());
    trace::record_span(AccessKind::Read, arr.region, lo, hi);
    out.copy_from_slice(&arr.data[..stride]);
    for (r, chunk) in arr.data.chunks_exact(stride).enumerate() {
        let hit = oequal(r, row);
        for (o, v) in out.iter_mut().zip(chunk) {
            *o = T::select(hit, v, o);
        }
    }
}

/// Row-granular [`oaccess_write`].
pub fn oaccess_write_row<T: Select>(arr: &mut TracedArray<T>, row: usize, values: &[T]) {
    let stride = values.len();
    debug_assert!(stride > 0 && arr.len().is_multiple_of(stride));
    debug_assert!(row < arr.len() / stride, "oaccess_write_row out of range");
    let (lo, hi) = arr.span(0..arr.len());
    trace::record_rw_span(arr.region, lo, hi);
    for (r, chunk) in arr.data.chunks_exact_mut(stride).enumerate() {
        let hit = oequal(r, row);
        for (slot, v) in chunk.iter_mut().zip(values) {
            *slot = T::select(hit, v, slot);
        }
    }
}

//! Data-oblivious building blocks.
//!
//! Scalars are compared and selected without branching ([`word`]); arrays
//! holding secret data live in [`TracedArray`]s, whose loads and stores are
//! recorded at cache-line granularity while a [`capture_trace`] is active.
//! Secret-indexed access goes through [`oaccess_read`] / [`oaccess_write`],
//! which scan the whole array, and sorting goes through a bitonic network
//! whose comparator sequence depends only on the array length.

mod array;
mod sort;
pub mod trace;
mod word;

pub use array::{oaccess_read, oaccess_read_row, oaccess_write, oaccess_write_row, TracedArray};
pub use sort::{bitonic_network, osort, osort_by, Comparator};
pub use trace::{capture_trace, is_recording, AccessKind, AccessTrace, RegionId, TraceEvent, GRANULE};
pub use word::{
    oassign, ocompare, ocswap, oequal, ogreater, oless, omax, omin, oselect_index, CompareMode, Cond, Select,
    Word,
};

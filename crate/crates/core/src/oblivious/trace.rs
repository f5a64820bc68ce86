//! Modeled memory-access traces.
//!
//! An attacker observing the enclave is modeled as seeing every load and
//! store at cache-line (64 byte) granularity, tagged with the memory region it
//! falls in. [`capture_trace`] installs a recorder on the current thread and
//! returns everything the computation touched through [`TracedArray`]s.
//!
//! [`TracedArray`]: super::TracedArray

use std::cell::{Cell, RefCell};
use std::fmt;

/// Cache-line size of the access model.
pub const GRANULE: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AccessKind {
    Read,
    Write,
}

/// Opaque region identifier. Regions are numbered in allocation order within
/// a capture, so two runs that allocate the same arrays in the same order
/// see the same identifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TraceEvent {
    pub kind: AccessKind,
    pub region: RegionId,
    pub line: u64,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            AccessKind::Read => 'R',
            AccessKind::Write => 'W',
        };
        write!(f, "{k} r{}:{}", self.region.0, self.line)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AccessTrace {
    pub events: Vec<TraceEvent>,
}

impl AccessTrace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Index of the first event at which the traces differ, counting a length
    /// mismatch as a divergence at the shorter length.
    pub fn first_divergence(&self, other: &AccessTrace) -> Option<usize> {
        let common = self.events.len().min(other.events.len());
        (0..common)
            .find(|&i| self.events[i] != other.events[i])
            .or_else(|| (self.events.len() != other.events.len()).then_some(common))
    }

    pub fn count(&self, kind: AccessKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }
}

thread_local! {
    static RECORDER: RefCell<Option<Vec<TraceEvent>>> = const { RefCell::new(None) };
    static NEXT_REGION: Cell<u32> = const { Cell::new(0) };
}

/// True while a capture is active on this thread.
pub fn is_recording() -> bool {
    cfg!(feature = "trace") && RECORDER.with(|r| r.borrow().is_some())
}

pub(crate) fn next_region() -> RegionId {
    NEXT_REGION.with(|c| {
        let id = c.get();
        c.set(id.wrapping_add(1));
        RegionId(id)
    })
}

/// Records one event per granule overlapping `[byte_lo, byte_hi)`.
#[inline]
pub(crate) fn record_span(kind: AccessKind, region: RegionId, byte_lo: usize, byte_hi: usize) {
    #[cfg(feature = "trace")]
    {
        if byte_hi <= byte_lo {
            return;
        }
        RECORDER.with(|r| {
            if let Some(events) = r.borrow_mut().as_mut() {
                let first = byte_lo / GRANULE;
                let last = (byte_hi - 1) / GRANULE;
                events.extend((first..=last).map(|line| TraceEvent {
                    kind,
                    region,
                    line: line as u64,
                }));
            }
        });
    }
    #[cfg(not(feature = "trace"))]
    {
        let _ = (kind, region, byte_lo, byte_hi);
    }
}

/// Records a read and then a write for every granule of `[byte_lo, byte_hi)`,
/// interleaved per granule.
#[inline]
pub(crate) fn record_rw_span(region: RegionId, byte_lo: usize, byte_hi: usize) {
    #[cfg(feature = "trace")]
    {
        if byte_hi <= byte_lo {
            return;
        }
        RECORDER.with(|r| {
            if let Some(events) = r.borrow_mut().as_mut() {
                for line in byte_lo / GRANULE..=(byte_hi - 1) / GRANULE {
                    let line = line as u64;
                    events.push(TraceEvent { kind: AccessKind::Read, region, line });
                    events.push(TraceEvent { kind: AccessKind::Write, region, line });
                }
            }
        });
    }
    #[cfg(not(feature = "trace"))]
    {
        let _ = (region, byte_lo, byte_hi);
    }
}

struct CaptureGuard {
    prev_events: Option<Vec<TraceEvent>>,
    prev_region: u32,
}

impl Drop for CaptureGuard {
    fn drop(&mut self) {
        let prev = self.prev_events.take();
        RECORDER.with(|r| *r.borrow_mut() = prev);
        NEXT_REGION.with(|c| c.set(self.prev_region));
    }
}

/// Runs `computation` with a fresh recorder bound to the current thread and
/// returns its result together with the ordered access trace.
///
/// Region numbering restarts at zero inside the capture. Captures nest: the
/// outer recorder is restored (without the inner events) afterwards.
pub fn capture_trace<R>(computation: impl FnOnce() -> R) -> (R, AccessTrace) {
    let prev_events = RECORDER.with(|r| r.borrow_mut().replace(Vec::new()));
    let prev_region = NEXT_REGION.with(|c| c.replace(0));
    let guard = CaptureGuard { prev_events, prev_region };
    let result = computation();
    let events = RECORDER.with(|r| r.borrow_mut().replace(Vec::new())).unwrap_or_default();
    drop(guard);
    (result, AccessTrace { events })
}

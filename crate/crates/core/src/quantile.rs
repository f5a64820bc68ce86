//! Oblivious quantile summaries that fix the histogram bin boundaries.
//!
//! Each worker summarizes its samples per feature ([`build_summary`]), prunes
//! the summary to `b + 1` entries ([`prune_summary`]), and the pruned
//! summaries are folded together in worker order ([`merge_summaries`]). The
//! valid values of the final summary are the bin edges ([`boundaries`]).
//!
//! Every step is a fixed sequence of bitonic sorts and linear scans whose
//! shape depends only on the summary capacities and `b`.

use crate::oblivious::{oassign, oequal, ogreater, oless, osort_by, Cond, Select, TracedArray};

/// One `(value, weight)` tuple. `valid == 0` marks a dummy slot; dummies
/// always carry zero value and weight so that all dummies are identical.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummaryEntry {
    pub value: f64,
    pub weight: f64,
    pub valid: u64,
}

impl SummaryEntry {
    pub const DUMMY: SummaryEntry = SummaryEntry { value: 0.0, weight: 0.0, valid: 0 };

    pub fn new(value: f64, weight: f64) -> Self {
        SummaryEntry { value, weight, valid: 1 }
    }

    pub fn is_valid(&self) -> bool {
        self.valid == 1
    }
}

impl Select for SummaryEntry {
    #[inline]
    fn select(c: Cond, t: &Self, f: &Self) -> Self {
        SummaryEntry {
            value: f64::select(c, &t.value, &f.value),
            weight: f64::select(c, &t.weight, &f.weight),
            valid: u64::select(c, &t.valid, &f.valid),
        }
    }
}

/// Valid entries first, ascending by value; dummies last.
#[inline]
fn entry_less(a: &SummaryEntry, b: &SummaryEntry) -> Cond {
    let (ia, ib) = (a.valid ^ 1, b.valid ^ 1);
    oless(ia, ib) | (oequal(ia, ib) & oless(a.value, b.value))
}

fn sort_entries(arr: &mut TracedArray<SummaryEntry>) {
    osort_by(arr, SummaryEntry::DUMMY, entry_less);
}

#[derive(Clone, Debug)]
pub struct QuantileSummary {
    pub feature_id: usize,
    pub entries: TracedArray<SummaryEntry>,
}

impl QuantileSummary {
    pub fn empty(feature_id: usize) -> Self {
        QuantileSummary { feature_id, entries: TracedArray::new(Vec::new()) }
    }

    /// Public length of the summary, dummies included.
    pub fn capacity(&self) -> usize {
        self.entries.len()
    }

    /// Untraced copy of the valid entries, for declassified output and tests.
    pub fn valid_entries(&self) -> Vec<SummaryEntry> {
        self.entries.as_slice().iter().copied().filter(SummaryEntry::is_valid).collect()
    }
}

/// Sorts the samples of `values` and merges equal values into one entry
/// carrying the summed weight. Output capacity equals the input length.
pub fn build_summary(mut values: TracedArray<SummaryEntry>, feature_id: usize) -> QuantileSummary {
    sort_entries(&mut values);
    let entries = compact_sorted(&values);
    QuantileSummary { feature_id, entries }
}

/// Convenience wrapper over [`build_summary`] for parallel value/weight slices.
pub fn summarize_column(feature_id: usize, values: &[f64], weights: &[f64]) -> QuantileSummary {
    assert_eq!(values.len(), weights.len());
    let samples = values.iter().zip(weights).map(|(&v, &w)| SummaryEntry::new(v, w)).collect();
    build_summary(TracedArray::new(samples), feature_id)
}

/// Collapses runs of equal values in a sorted array: the last element of each
/// run receives the run's total weight, the others become dummies, and a final
/// sort moves the dummies to the end.
fn compact_sorted(sorted: &TracedArray<SummaryEntry>) -> TracedArray<SummaryEntry> {
    let n = sorted.len();
    let mut out = TracedArray::filled(n, SummaryEntry::DUMMY);
    if n == 0 {
        return out;
    }
    let mut prev = sorted.read(0);
    let mut acc = prev.weight;
    for i in 1..n {
        let cur = sorted.read(i);
        let valid_pair = Cond::from_bit(cur.valid & prev.valid);
        let same = valid_pair & oequal(cur.value, prev.value);
        let closed = SummaryEntry { value: prev.value, weight: acc, valid: 1 };
        let emit = Cond::from_bit(prev.valid) & !same;
        out.write(i - 1, SummaryEntry::select(emit, &closed, &SummaryEntry::DUMMY));
        acc = oassign(same, acc + cur.weight, cur.weight);
        prev = cur;
    }
    let closed = SummaryEntry { value: prev.value, weight: acc, valid: 1 };
    out.write(n - 1, SummaryEntry::select(Cond::from_bit(prev.valid), &closed, &SummaryEntry::DUMMY));
    sort_entries(&mut out);
    out
}

/// Keeps the entries at positional ranks `0, s, 2s, …, (b−1)s` and the last
/// valid entry, where `s = ⌈m / b⌉` and `m` is the number of valid entries.
/// When `m ≤ b + 1` every valid entry is kept. Output capacity is `b + 1`.
pub fn prune_summary(s: &QuantileSummary, b: usize) -> QuantileSummary {
    assert!(b >= 1, "bin budget must be positive");
    let n = s.capacity();
    let src = &s.entries;

    let mut m = 0u64;
    for e in src.read_range(0..n) {
        m += e.valid;
    }
    let b64 = b as u64;
    let keep_all = !ogreater(m, b64 + 1);
    let step = m.div_ceil(b64);
    let step = oassign(oequal(step, 0u64), 1, step);

    let mut picked = TracedArray::filled(n, SummaryEntry::DUMMY);
    let mut next_rank = 0u64;
    let mut taken = 0u64;
    for p in 0..n {
        let e = src.read(p);
        let p = p as u64;
        let at_rank = oequal(p, next_rank);
        let in_budget = oless(taken, b64);
        let is_last = oequal(p + 1, m);
        let sel = Cond::from_bit(e.valid) & (keep_all | (at_rank & in_budget) | is_last);
        picked.write(p as usize, SummaryEntry::select(sel, &e, &SummaryEntry::DUMMY));
        next_rank = oassign(at_rank, next_rank + step, next_rank);
        taken = oassign(at_rank, taken + 1, taken);
    }
    sort_entries(&mut picked);
    picked.resize(b + 1, SummaryEntry::DUMMY);
    QuantileSummary { feature_id: s.feature_id, entries: picked }
}

/// Concatenates two summaries, sorts, and merges duplicate values while
/// summing their weights. Capacity is the sum of the input capacities.
pub fn merge_compact(a: &QuantileSummary, other: &QuantileSummary) -> QuantileSummary {
    assert_eq!(a.feature_id, other.feature_id, "merging summaries of different features");
    let (na, nb) = (a.capacity(), other.capacity());
    let mut joined = TracedArray::filled(na + nb, SummaryEntry::DUMMY);
    joined.write_range(0, a.entries.read_range(0..na));
    joined.write_range(na, other.entries.read_range(0..nb));
    sort_entries(&mut joined);
    QuantileSummary { feature_id: a.feature_id, entries: compact_sorted(&joined) }
}

/// [`merge_compact`] followed by [`prune_summary`] to the bin budget.
pub fn merge_summaries(a: &QuantileSummary, other: &QuantileSummary, b: usize) -> QuantileSummary {
    prune_summary(&merge_compact(a, other), b)
}

/// Folds per-worker summaries of one feature, in worker order, into the
/// global summary.
pub fn global_summary<'a>(mut summaries: impl Iterator<Item = &'a QuantileSummary>, b: usize) -> Option<QuantileSummary> {
    let first = prune_summary(summaries.next()?, b);
    Some(summaries.fold(first, |acc, s| merge_summaries(&acc, s, b)))
}

/// Valid values of a compacted summary in ascending order: the bin edges.
pub fn boundaries(global: &QuantileSummary) -> Vec<f64> {
    global.entries.read_range(0..global.capacity()).iter().filter(|e| e.is_valid()).map(|e| e.value).collect()
}

/// Bin edges of one feature, padded to a public length of `b + 1` with
/// `+∞`. Bin `k` covers `[edge_k, edge_{k+1})`, the last bin is closed above,
/// values below the first edge fall in bin 0 and values above the last edge
/// in the last bin.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureCuts {
    edges: Vec<f64>,
    num_edges: usize,
}

impl FeatureCuts {
    /// `edges` must be strictly increasing and hold at most `b + 1` values.
    pub fn new(mut edges: Vec<f64>, b: usize) -> Self {
        assert!(edges.len() <= b + 1, "{} edges exceed the bin budget {b}", edges.len());
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]), "edges must be strictly increasing");
        let num_edges = edges.len();
        edges.resize(b + 1, f64::INFINITY);
        FeatureCuts { edges, num_edges }
    }

    /// Histogram width `b`.
    pub fn budget(&self) -> usize {
        self.edges.len() - 1
    }

    /// Number of bins actually in use (at least one).
    pub fn num_bins(&self) -> usize {
        self.num_edges.saturating_sub(1).max(1)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges[..self.num_edges]
    }

    /// Edge `k` of the padded array (`+∞` past the real edges).
    pub fn edge(&self, k: usize) -> f64 {
        self.edges[k]
    }

    /// Threshold separating bins `..=cut` from `cut + 1..`.
    pub fn threshold(&self, cut: usize) -> f64 {
        self.edges[cut + 1]
    }

    /// Whether a split after bin `cut` separates two real bins.
    pub fn is_cut(&self, cut: usize) -> bool {
        cut + 1 < self.num_bins()
    }

    /// Bin index by binary search. Not oblivious.
    pub fn bin_of(&self, x: f64) -> usize {
        if self.num_edges < 3 {
            return 0;
        }
        self.edges[1..self.num_edges - 1].partition_point(|&e| e <= x)
    }

    /// Bin index by a full scan over the padded edges.
    #[inline]
    pub fn obin_of(&self, x: f64) -> usize {
        let mut count = 0usize;
        for &e in &self.edges[1..] {
            count += (!oless(x, e)).bit() as usize;
        }
        let last = self.num_bins() - 1;
        oassign(ogreater(count, last), last, count)
    }
}

/// Bin edges for every feature, shared by all workers for a whole training
/// session.
#[derive(Clone, Debug, PartialEq)]
pub struct BinEdges {
    pub features: Vec<FeatureCuts>,
}

impl BinEdges {
    pub fn new(per_feature: Vec<Vec<f64>>, b: usize) -> Self {
        BinEdges { features: per_feature.into_iter().map(|e| FeatureCuts::new(e, b)).collect() }
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn budget(&self) -> usize {
        self.features.first().map_or(0, FeatureCuts::budget)
    }
}

//! Per-node gradient histograms built in one oblivious pass per tree level.

use crate::error::{Error, Result};
use crate::fixed::Fixed;
use crate::oblivious::{oaccess_read, oaccess_read_row, oaccess_write, oaccess_write_row, oequal, Cond, Select, TracedArray};
use crate::objective::GradPair;
use crate::quantile::BinEdges;

/// Gradient statistics of one histogram bin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct HistBin {
    pub g: Fixed,
    pub h: Fixed,
    pub count: i64,
}

impl HistBin {
    pub const ZERO: HistBin = HistBin { g: Fixed::ZERO, h: Fixed::ZERO, count: 0 };

    pub fn from_grad(gp: FixedGrad) -> HistBin {
        HistBin { g: gp.g, h: gp.h, count: 1 }
    }

    #[inline]
    pub fn add(self, o: HistBin) -> HistBin {
        HistBin { g: self.g + o.g, h: self.h + o.h, count: self.count + o.count }
    }

    #[inline]
    pub fn sub(self, o: HistBin) -> HistBin {
        HistBin { g: self.g - o.g, h: self.h - o.h, count: self.count - o.count }
    }
}

impl Select for HistBin {
    #[inline]
    fn select(c: Cond, t: &Self, f: &Self) -> Self {
        HistBin {
            g: Fixed::select(c, &t.g, &f.g),
            h: Fixed::select(c, &t.h, &f.h),
            count: i64::select(c, &t.count, &f.count),
        }
    }
}

/// Gradient pair quantized for exact accumulation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FixedGrad {
    pub g: Fixed,
    pub h: Fixed,
}

impl From<GradPair> for FixedGrad {
    fn from(gp: GradPair) -> Self {
        FixedGrad { g: Fixed::from_f64(gp.g), h: Fixed::from_f64(gp.h) }
    }
}

impl Select for FixedGrad {
    #[inline]
    fn select(c: Cond, t: &Self, f: &Self) -> Self {
        FixedGrad { g: Fixed::select(c, &t.g, &f.g), h: Fixed::select(c, &t.h, &f.h) }
    }
}

/// Histograms of one tree level: `nodes × features × bins`, node-major.
#[derive(Clone, Debug)]
pub struct LevelHistograms {
    pub nodes: usize,
    pub features: usize,
    pub bins: usize,
    pub data: TracedArray<HistBin>,
}

impl LevelHistograms {
    pub fn zeroed(nodes: usize, features: usize, bins: usize) -> Self {
        LevelHistograms { nodes, features, bins, data: TracedArray::filled(nodes * features * bins, HistBin::ZERO) }
    }

    pub fn from_vec(nodes: usize, features: usize, bins: usize, data: Vec<HistBin>) -> Self {
        assert_eq!(data.len(), nodes * features * bins);
        LevelHistograms { nodes, features, bins, data: TracedArray::new(data) }
    }

    pub fn stride(&self) -> usize {
        self.features * self.bins
    }

    /// Bins of one node; `node` is a public index.
    pub fn node(&self, node: usize) -> &[HistBin] {
        let s = self.stride();
        self.data.read_range(node * s..(node + 1) * s)
    }

    /// Histogram of one `(node, feature)` pair; untraced.
    pub fn bins_of(&self, node: usize, feature: usize) -> &[HistBin] {
        let start = (node * self.features + feature) * self.bins;
        &self.data.as_slice()[start..start + self.bins]
    }
}

/// Adds every sample's gradient pair to its node's histograms in one scan.
///
/// For each sample the owning node's histograms are fetched with a row
/// oaccess, the sample's bin in every feature is bumped with conditional
/// selects over all `b` bins, and the row is written back with a row oaccess.
/// The trace depends only on `(n, d, b, level)`.
pub fn build_level_histograms(
    features: &TracedArray<f64>,
    num_features: usize,
    grads: &TracedArray<FixedGrad>,
    markers: &TracedArray<u64>,
    level: usize,
    edges: &BinEdges,
) -> LevelHistograms {
    let d = num_features;
    let b = edges.budget();
    let nodes = 1usize << level;
    let n = grads.len();
    let mut hist = LevelHistograms::zeroed(nodes, d, b);
    let stride = hist.stride();
    let mut buf = vec![HistBin::ZERO; stride];
    for i in 0..n {
        let row = features.read_range(i * d..(i + 1) * d);
        let add = HistBin::from_grad(grads.read(i));
        let node = markers.read(i) as usize;
        oaccess_read_row(&hist.data, node, stride, &mut buf);
        for (f, (&x, cuts)) in row.iter().zip(&edges.features).enumerate() {
            let bin = cuts.obin_of(x);
            for (k, slot) in buf[f * b..(f + 1) * b].iter_mut().enumerate() {
                let bumped = slot.add(add);
                *slot = HistBin::select(oequal(k, bin), &bumped, slot);
            }
        }
        oaccess_write_row(&mut hist.data, node, &buf);
    }
    hist
}

/// Per-node gradient totals, used on the bottom level where only leaf
/// weights are needed.
pub fn build_level_totals(grads: &TracedArray<FixedGrad>, markers: &TracedArray<u64>, level: usize) -> LevelHistograms {
    let mut hist = LevelHistograms::zeroed(1 << level, 1, 1);
    for i in 0..grads.len() {
        let add = HistBin::from_grad(grads.read(i));
        let node = markers.read(i) as usize;
        let cur = oaccess_read(&hist.data, node);
        oaccess_write(&mut hist.data, node, cur.add(add));
    }
    hist
}

/// Elementwise sum of per-worker histogram sets, in worker order.
pub fn aggregate_histograms(sets: &[Vec<HistBin>]) -> Result<Vec<HistBin>> {
    let Some(first) = sets.first() else {
        return Err(Error::Collective("no histograms to aggregate".into()));
    };
    let mut total = first.clone();
    for (w, set) in sets.iter().enumerate().skip(1) {
        if set.len() != total.len() {
            return Err(Error::ShapeMismatch { worker: w, expected: total.len(), got: set.len() });
        }
        for (t, s) in total.iter_mut().zip(set) {
            *t = t.add(*s);
        }
    }
    Ok(total)
}

//! Split scoring over aggregated histograms.

use crate::histogram::HistBin;
use crate::oblivious::{oassign, ogreater, oless, Cond, Select};
use crate::params::TrainParams;
use crate::quantile::BinEdges;

#[inline]
fn score(g: f64, h: f64, lambda: f64) -> f64 {
    let den = h + lambda;
    let ok = ogreater(den, 0.0);
    let safe = oassign(ok, den, 1.0);
    oassign(ok, g * g / safe, 0.0)
}

/// Loss reduction of splitting a node with totals `(g, h)` into
/// `(gl, hl)` and `(gr, hr)`, minus `gamma`.
#[inline]
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, g: f64, h: f64, params: &TrainParams) -> f64 {
    0.5 * (score(gl, hl, params.lambda) + score(gr, hr, params.lambda) - score(g, h, params.lambda)) - params.gamma
}

/// Optimal leaf value `−G / (H + λ)`, scaled by the learning rate; zero when
/// `H + λ` vanishes.
#[inline]
pub fn leaf_weight(g: f64, h: f64, params: &TrainParams) -> f64 {
    let den = h + params.lambda;
    let ok = ogreater(den, 0.0);
    let safe = oassign(ok, den, 1.0);
    oassign(ok, -g / safe * params.eta, 0.0)
}

/// Result of scanning one node's histograms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitChoice {
    pub feature: u64,
    pub bin: u64,
    pub threshold: f64,
    pub gain: f64,
    /// Whether the best cut exists and has positive gain.
    pub splittable: Cond,
    /// Node totals.
    pub total: HistBin,
}

/// Scans every `(feature, cut)` pair of one node with conditional selects.
///
/// A cut after bin `c` is admissible when it separates two real bins and both
/// sides have positive hessian mass. Strict comparison keeps the first of
/// tied candidates, so the lowest `(feature, bin)` wins.
pub fn best_split(node_hist: &[HistBin], edges: &BinEdges, params: &TrainParams) -> SplitChoice {
    let b = edges.budget();
    let total = node_hist[..b].iter().fold(HistBin::ZERO, |a, &x| a.add(x));
    let (g, h) = (total.g.to_f64(), total.h.to_f64());
    let mut best = SplitChoice {
        feature: 0,
        bin: 0,
        threshold: 0.0,
        gain: f64::NEG_INFINITY,
        splittable: Cond::FALSE,
        total,
    };
    for (f, cuts) in edges.features.iter().enumerate() {
        let bins = &node_hist[f * b..(f + 1) * b];
        let mut left = HistBin::ZERO;
        for (c, bin) in bins.iter().enumerate().take(b.saturating_sub(1)) {
            left = left.add(*bin);
            let right = total.sub(left);
            let (gl, hl) = (left.g.to_f64(), left.h.to_f64());
            let (gr, hr) = (right.g.to_f64(), right.h.to_f64());
            let gain = split_gain(gl, hl, gr, hr, g, h, params);
            let admissible = oless(c + 1, cuts.num_bins()) & ogreater(hl, 0.0) & ogreater(hr, 0.0);
            let better = admissible & ogreater(gain, best.gain);
            best.feature = oassign(better, f as u64, best.feature);
            best.bin = oassign(better, c as u64, best.bin);
            best.threshold = oassign(better, cuts.threshold(c), best.threshold);
            best.gain = oassign(better, gain, best.gain);
        }
    }
    best.splittable = ogreater(best.gain, 0.0);
    best
}

impl Select for SplitChoice {
    fn select(c: Cond, t: &Self, f: &Self) -> Self {
        SplitChoice {
            feature: u64::select(c, &t.feature, &f.feature),
            bin: u64::select(c, &t.bin, &f.bin),
            threshold: f64::select(c, &t.threshold, &f.threshold),
            gain: f64::select(c, &t.gain, &f.gain),
            splittable: Cond::from_bit(u64::select(c, &t.splittable.bit(), &f.splittable.bit())),
            total: HistBin::select(c, &t.total, &f.total),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed::Fixed;

    fn bin(g: f64, h: f64) -> HistBin {
        HistBin { g: Fixed::from_f64(g), h: Fixed::from_f64(h), count: 1 }
    }

    fn params(lambda: f64, gamma: f64) -> TrainParams {
        TrainParams { lambda, gamma, eta: 1.0, ..TrainParams::default() }
    }

    #[test]
    fn two_bin_example() {
        let edges = BinEdges::new(vec![vec![0.0, 1.0, 2.0]], 2);
        let s = best_split(&[bin(-2.0, 1.0), bin(2.0, 1.0)], &edges, &params(1.0, 0.0));
        assert!(s.splittable.declassify());
        assert_eq!((s.feature, s.bin, s.threshold), (0, 0, 1.0));
        assert!((s.gain - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_gradients_make_a_zero_leaf() {
        let edges = BinEdges::new(vec![vec![0.0, 1.0, 2.0]], 2);
        let p = params(1.0, 0.1);
        let s = best_split(&[bin(0.0, 1.0), bin(0.0, 1.0)], &edges, &p);
        assert!(!s.splittable.declassify());
        assert!((s.gain + 0.1).abs() < 1e-12);
        assert_eq!(leaf_weight(0.0, 2.0, &p), 0.0);
    }

    #[test]
    fn ties_pick_lowest_feature_and_bin() {
        // Both features carry identical histograms.
        let edges = BinEdges::new(vec![vec![0.0, 1.0, 2.0, 3.0]; 2], 3);
        let h = [bin(-1.0, 1.0), bin(0.0, 1.0), bin(1.0, 1.0)];
        let hist: Vec<HistBin> = h.iter().chain(&h).copied().collect();
        let s = best_split(&hist, &edges, &params(0.0, 0.0));
        // Cuts after bin 0 and after bin 1 tie; feature 0, bin 0 wins.
        assert_eq!((s.feature, s.bin), (0, 0));
    }

    #[test]
    fn padded_cuts_are_ignored() {
        let edges = BinEdges::new(vec![vec![0.0, 1.0]], 4);
        let hist = [bin(-3.0, 1.0), bin(0.0, 0.0), bin(0.0, 0.0), bin(0.0, 0.0)];
        assert!(!best_split(&hist, &edges, &params(0.0, 0.0)).splittable.declassify());
    }

    #[test]
    fn leaf_weight_formula() {
        let p = TrainParams { lambda: 1.0, eta: 0.5, ..TrainParams::default() };
        assert_eq!(leaf_weight(-3.0, 2.0, &p), 0.5);
        let p = TrainParams { lambda: 0.0, ..TrainParams::default() };
        assert_eq!(leaf_weight(1.0, 0.0, &p), 0.0);
    }
}

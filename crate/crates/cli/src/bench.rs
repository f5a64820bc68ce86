//! Wall-clock comparison of the oblivious trainer against the plain
//! reference trainer on the same data and bin edges.

use std::fmt;
use std::time::Instant;

use sxgb_core::reference::reference_train;
use sxgb_core::{par, sketch_edges, synth, train, LocalCollective, TrainParams};

#[derive(Clone, Copy, Debug)]
pub struct BenchConfig {
    pub n: usize,
    pub d: usize,
    pub bins: usize,
    pub depth: usize,
    pub rounds: usize,
    pub workers: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { n: 4096, d: 16, bins: 16, depth: 4, rounds: 3, workers: 4, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub oblivious: f64,
    pub oblivious_sequential: f64,
    pub reference: f64,
}

impl BenchReport {
    /// Oblivious (parallel) time over reference time.
    pub fn slowdown(&self) -> f64 {
        self.oblivious / self.reference
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.config;
        writeln!(f, "shape: n={} d={} b={} D={} rounds={} workers={}", c.n, c.d, c.bins, c.depth, c.rounds, c.workers)?;
        writeln!(f, "reference             {:>10.4} s", self.reference)?;
        writeln!(f, "oblivious             {:>10.4} s", self.oblivious)?;
        writeln!(f, "oblivious sequential  {:>10.4} s", self.oblivious_sequential)?;
        write!(f, "oblivious slowdown    {:>10.2}x", self.slowdown())
    }
}

fn timed<R>(f: impl FnOnce() -> R) -> (R, f64) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed().as_secs_f64())
}

pub fn run(c: BenchConfig) -> sxgb_core::Result<BenchReport> {
    let data = synth::separable(c.seed, c.n, c.d, 0.05);
    let params = TrainParams { num_bins: c.bins, max_depth: c.depth, num_rounds: c.rounds, ..TrainParams::default() };
    let parts = data.split_round_robin(c.workers);
    let edges = sketch_edges(&parts, &params, &mut LocalCollective)?;
    let (reference, t_ref) = timed(|| reference_train(&data, &edges, &params));
    let (oblivious, t_obl) = timed(|| train(&parts, &edges, &params, &mut LocalCollective));
    let (sequential, t_seq) = timed(|| par::sequential(|| train(&parts, &edges, &params, &mut LocalCollective)));
    let (reference, oblivious, sequential) = (reference?, oblivious?, sequential?);
    debug_assert_eq!(oblivious.to_bytes(), sequential.to_bytes());
    log::debug!("models: {} / {} trees", reference.trees.len(), oblivious.trees.len());
    Ok(BenchReport { config: c, oblivious: t_obl, oblivious_sequential: t_seq, reference: t_ref })
}

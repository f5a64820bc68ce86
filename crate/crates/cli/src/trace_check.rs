//! Trace-independence harness: run a scenario with a fixed public shape and
//! fresh secret data per trial, and compare the captured access traces.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sxgb_core::oblivious::{
    bitonic_network, capture_trace, oaccess_read, oaccess_write, ocswap, ogreater, omax, osort, AccessTrace, TracedArray,
};
use sxgb_core::quantile::{boundaries, merge_summaries, prune_summary, summarize_column};
use sxgb_core::{synth, train_with_sketch, Dataset, LocalCollective, ObliviousModel, Output, TrainParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Scenario {
    Primitives,
    Quantile,
    Train,
    Predict,
    /// Sort whose compare-exchange writes only when it swaps. Must fail.
    Leaky,
}

/// Public shape of the `train` and `predict` scenarios.
pub const TRAIN_SHAPE: (usize, usize, usize, usize, usize) = (128, 4, 8, 3, 2);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    pub trial: usize,
    pub index: usize,
}

#[derive(Clone, Debug)]
pub struct TraceReport {
    pub scenario: Scenario,
    pub trials: usize,
    pub events: usize,
    pub divergence: Option<Divergence>,
}

impl TraceReport {
    pub fn passed(&self) -> bool {
        self.divergence.is_none()
    }
}

impl fmt::Display for TraceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.divergence {
            None => write!(f, "PASS {:?}: {} trials, {} events each", self.scenario, self.trials, self.events),
            Some(d) => write!(f, "FAIL {:?}: trial {} diverges from trial 0 at event {}", self.scenario, d.trial, d.index),
        }
    }
}

fn primitives(rng: &mut ChaCha8Rng) -> AccessTrace {
    let data: Vec<u64> = (0..64).map(|_| rng.gen()).collect();
    let (i, j, v) = (rng.gen_range(0..64), rng.gen_range(0..64), rng.gen());
    capture_trace(|| {
        let mut arr = TracedArray::new(data);
        let x = oaccess_read(&arr, i);
        oaccess_write(&mut arr, j, omax(x, v));
        let (mut a, mut b) = (arr.read(0), arr.read(1));
        let swap = ogreater(a, b);
        ocswap(swap, &mut a, &mut b);
        arr.write(0, a);
        arr.write(1, b);
        osort(&mut arr, u64::MAX);
    })
    .1
}

fn quantile(rng: &mut ChaCha8Rng) -> AccessTrace {
    let spread = rng.gen_range(1..1000);
    let mut column = |n: usize| -> (Vec<f64>, Vec<f64>) {
        ((0..n).map(|_| f64::from(rng.gen_range(-spread..spread))).collect(), (0..n).map(|_| rng.gen_range(0.0..1.0)).collect())
    };
    let (a, b) = (column(128), column(96));
    capture_trace(|| {
        let sa = prune_summary(&summarize_column(0, &a.0, &a.1), 8);
        let sb = prune_summary(&summarize_column(0, &b.0, &b.1), 8);
        boundaries(&merge_summaries(&sa, &sb, 8))
    })
    .1
}

fn train_data(rng: &mut ChaCha8Rng) -> Dataset {
    let (n, d, ..) = TRAIN_SHAPE;
    let mut data = synth::uniform(rng.gen(), n, d);
    let labels: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect();
    data = Dataset::new(d, data.features().to_vec(), labels).unwrap();
    data
}

fn train_params() -> TrainParams {
    let (_, _, b, depth, rounds) = TRAIN_SHAPE;
    TrainParams { num_bins: b, max_depth: depth, num_rounds: rounds, ..TrainParams::default() }
}

fn train(rng: &mut ChaCha8Rng) -> AccessTrace {
    let parts = train_data(rng).split_round_robin(2);
    capture_trace(|| train_with_sketch(&parts, &train_params(), &mut LocalCollective).unwrap()).1
}

fn predict(rng: &mut ChaCha8Rng) -> AccessTrace {
    let data = train_data(rng);
    let (_, model) = train_with_sketch(&[data], &train_params(), &mut LocalCollective).unwrap();
    let x: Vec<f64> = (0..TRAIN_SHAPE.1).map(|_| rng.gen_range(-3.0..3.0)).collect();
    capture_trace(|| ObliviousModel::new(&model).predict_row(&x, Output::Probability).unwrap()).1
}

/// Negative control: a compare-exchange that writes back only on a swap.
pub fn leaky_sort(arr: &mut TracedArray<u64>) {
    for c in bitonic_network(arr.len()) {
        let (a, b) = (arr.read(c.lo), arr.read(c.hi));
        if (a > b) == c.ascending {
            arr.write(c.lo, b);
            arr.write(c.hi, a);
        }
    }
}

fn leaky(rng: &mut ChaCha8Rng) -> AccessTrace {
    let data: Vec<u64> = (0..64).map(|_| rng.gen()).collect();
    capture_trace(|| leaky_sort(&mut TracedArray::new(data))).1
}

pub fn capture(scenario: Scenario, rng: &mut ChaCha8Rng) -> AccessTrace {
    match scenario {
        Scenario::Primitives => primitives(rng),
        Scenario::Quantile => quantile(rng),
        Scenario::Train => train(rng),
        Scenario::Predict => predict(rng),
        Scenario::Leaky => leaky(rng),
    }
}

pub fn run(scenario: Scenario, trials: usize, seed: u64) -> TraceReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = capture(scenario, &mut rng);
    let mut divergence = None;
    for trial in 1..trials {
        if let Some(index) = base.first_divergence(&capture(scenario, &mut rng)) {
            divergence = Some(Divergence { trial, index });
            break;
        }
    }
    TraceReport { scenario, trials, events: base.len(), divergence }
}

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sxgb_core::oblivious::capture_trace;
use sxgb_core::quantile::*;

/// Straightforward implementation of the summary rules on plain vectors.
mod oracle {
    use super::*;

    pub fn build(values: &[(i64, i64)]) -> Vec<(i64, i64)> {
        let mut m = BTreeMap::new();
        for &(v, w) in values {
            *m.entry(v).or_insert(0) += w;
        }
        m.into_iter().collect()
    }

    pub fn prune(s: &[(i64, i64)], b: usize) -> Vec<(i64, i64)> {
        let m = s.len();
        if m <= b + 1 {
            return s.to_vec();
        }
        let step = m.div_ceil(b);
        let mut ranks: Vec<usize> = (0..b).map(|k| k * step).filter(|&r| r < m).collect();
        ranks.push(m - 1);
        ranks.dedup();
        ranks.into_iter().map(|r| s[r]).collect()
    }

    pub fn merge(a: &[(i64, i64)], c: &[(i64, i64)], b: usize) -> Vec<(i64, i64)> {
        let joined: Vec<_> = a.iter().chain(c).copied().collect();
        prune(&build(&joined), b)
    }
}

fn as_pairs(s: &QuantileSummary) -> Vec<(i64, i64)> {
    s.valid_entries().iter().map(|e| (e.value as i64, e.weight as i64)).collect()
}

fn random_column(rng: &mut ChaCha8Rng, n: usize) -> Vec<(i64, i64)> {
    let spread = rng.gen_range(1..=3 * n as i64);
    (0..n).map(|_| (rng.gen_range(-spread..=spread), rng.gen_range(0..5))).collect()
}

fn summarize(values: &[(i64, i64)]) -> QuantileSummary {
    let v: Vec<f64> = values.iter().map(|p| p.0 as f64).collect();
    let w: Vec<f64> = values.iter().map(|p| p.1 as f64).collect();
    summarize_column(0, &v, &w)
}

#[test]
fn pipeline_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let b = rng.gen_range(1..=16);
        let (na, nc) = (rng.gen_range(1..=256), rng.gen_range(1..=256));
        let a_vals = random_column(&mut rng, na);
        let c_vals = random_column(&mut rng, nc);

        let a = summarize(&a_vals);
        let c = summarize(&c_vals);
        assert_eq!(as_pairs(&a), oracle::build(&a_vals));
        assert_eq!(a.capacity(), a_vals.len());

        let pa = prune_summary(&a, b);
        let pc = prune_summary(&c, b);
        assert_eq!(pa.capacity(), b + 1);
        assert_eq!(as_pairs(&pa), oracle::prune(&oracle::build(&a_vals), b));

        let merged = merge_summaries(&pa, &pc, b);
        let expected = oracle::merge(&as_pairs(&pa), &as_pairs(&pc), b);
        assert_eq!(as_pairs(&merged), expected);

        let edges = boundaries(&merged);
        assert!(edges.windows(2).all(|w| w[0] < w[1]), "edges strictly increasing");
    }
}

#[test]
fn weight_is_conserved() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.gen_range(1..200);
        let values: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..20u8))).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let s = summarize_column(0, &values, &weights);
        let out: f64 = s.valid_entries().iter().map(|e| e.weight).sum();
        assert!((out - total).abs() <= 1e-9 * total.max(1.0));

        let other = summarize_column(0, &values[..n / 2], &weights[..n / 2]);
        let other_total: f64 = weights[..n / 2].iter().sum();
        let merged = merge_compact(&s, &other);
        let out: f64 = merged.valid_entries().iter().map(|e| e.weight).sum();
        assert!((out - total - other_total).abs() <= 1e-9 * (total + other_total).max(1.0));
        let vals: Vec<f64> = merged.valid_entries().iter().map(|e| e.value).collect();
        assert!(vals.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn traces_depend_only_on_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let run = |a: Vec<(i64, i64)>, c: Vec<(i64, i64)>| {
        capture_trace(|| {
            let sa = prune_summary(&summarize(&a), 6);
            let sc = prune_summary(&summarize(&c), 6);
            boundaries(&merge_summaries(&sa, &sc, 6))
        })
        .1
    };
    let base = run(vec![(0, 1); 50], vec![(0, 1); 30]);
    for _ in 0..10 {
        let a = random_column(&mut rng, 50);
        let c = random_column(&mut rng, 30);
        assert_eq!(run(a, c), base);
    }
}

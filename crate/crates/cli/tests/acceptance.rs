//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use sxgb_cli::{bench, trace_check};
use sxgb_core::oblivious::{bitonic_network, capture_trace, osort, TracedArray};
use sxgb_core::reference::{reference_predict, reference_train};
use sxgb_core::*;
use sxgb_protocol::rows::EncryptedRowRecord;
use sxgb_protocol::*;

type Outcome = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(limit: Duration, start: Instant) -> Outcome {
    let t = start.elapsed();
    ensure!(t < limit, "took {:.1}s, limit {}s", t.as_secs_f64(), limit.as_secs());
    Ok(format!("{:.2}s", t.as_secs_f64()))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut nodes = 0;
    for case in 0..20u64 {
        let n = rng.gen_range(16..=512);
        let d = rng.gen_range(1..=8);
        let params = TrainParams {
            num_rounds: 3,
            max_depth: rng.gen_range(1..=4),
            num_bins: rng.gen_range(2..=16),
            gamma: [0.0, 0.1, 0.5][case as usize % 3],
            objective: if case % 4 == 3 { Objective::SquaredError } else { Objective::BinaryLogistic },
            ..TrainParams::default()
        };
        let data = synth::random_grid(1000 + case, n, d, rng.gen_range(2..64));
        let (edges, model) = train_with_sketch(std::slice::from_ref(&data), &params, &mut LocalCollective).map_err(|e| e.to_string())?;
        let reference = reference_train(&data, &edges, &params).map_err(|e| e.to_string())?;
        ensure!(model.trees.len() == reference.trees.len(), "case {case}: tree count");
        for (t, (a, b)) in model.trees.iter().zip(&reference.trees).enumerate() {
            ensure!(a.nodes.len() == b.nodes.len(), "case {case} tree {t}: node count");
            for (i, (x, y)) in a.nodes.iter().zip(&b.nodes).enumerate() {
                ensure!(x.kind() == y.kind(), "case {case} tree {t} node {i}: kind");
                ensure!(x.split_feature == y.split_feature, "case {case} tree {t} node {i}: feature");
                ensure!(x.threshold.to_bits() == y.threshold.to_bits(), "case {case} tree {t} node {i}: threshold");
                let dw = (x.leaf_weight - y.leaf_weight).abs();
                ensure!(dw <= 1e-9, "case {case} tree {t} node {i}: leaf differs by {dw:e}");
                nodes += 1;
            }
        }
    }
    Ok(format!("20 datasets, {nodes} nodes equal, {}", within(Duration::from_secs(120), start)?))
}

fn trace_independence() -> Outcome {
    let start = Instant::now();
    let mut out = Vec::new();
    for s in [trace_check::Scenario::Train, trace_check::Scenario::Predict] {
        let r = trace_check::run(s, 10, 77);
        ensure!(r.passed(), "{r}");
        out.push(format!("{s:?} {} events x10", r.events));
    }
    // Fixed model, 10 secret samples.
    let (_, model) = train_with_sketch(&[synth::uniform(5, 128, 4)], &TrainParams { max_depth: 3, num_bins: 8, num_rounds: 2, ..TrainParams::default() }, &mut LocalCollective)
        .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    let mut traces = (0..10).map(|_| {
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
        capture_trace(|| ObliviousModel::new(&model).predict_row(&x, Output::Probability).unwrap()).1
    });
    let base = traces.next().unwrap();
    for (i, t) in traces.enumerate() {
        ensure!(base.first_divergence(&t).is_none(), "fixed-model sample {} diverges", i + 1);
    }
    Ok(format!("{}, 0 divergences, {}", out.join(", "), within(Duration::from_secs(60), start)?))
}

/// Batcher's recursive construction, counted on its own.
fn recursive_count(n: usize) -> usize {
    if n < 2 {
        return 0;
    }
    fn merge(n: usize) -> usize {
        if n < 2 { 0 } else { n / 2 + 2 * merge(n / 2) }
    }
    2 * recursive_count(n / 2) + merge(n)
}

fn bitonic_counts() -> Outcome {
    let mut got = Vec::new();
    for (n, expected) in [(2usize, 1usize), (4, 6), (8, 24), (16, 80)] {
        let k = n.trailing_zeros() as usize;
        let network = bitonic_network(n).count();
        ensure!(n * k * (k + 1) / 4 == expected, "closed form at n={n}");
        ensure!(recursive_count(n) == expected, "recursive count at n={n}");
        ensure!(network == expected, "network has {network} comparators at n={n}, expected {expected}");
        // Each compare-exchange reads and writes both slots once.
        let trace = capture_trace(|| osort(&mut TracedArray::new(vec![0u64; n]), u64::MAX)).1;
        ensure!(trace.len() == 4 * expected, "osort traced {} accesses at n={n}", trace.len());
        got.push(network.to_string());
    }
    Ok(format!("n=2,4,8,16 -> {{{}}}", got.join(",")))
}

fn worker_invariance() -> Outcome {
    let data = synth::random_grid(31, 600, 6, 20);
    let params = TrainParams { num_rounds: 3, max_depth: 4, num_bins: 16, ..TrainParams::default() };
    let edges = sketch_edges(std::slice::from_ref(&data), &params, &mut LocalCollective).map_err(|e| e.to_string())?;
    let one = train(std::slice::from_ref(&data), &edges, &params, &mut LocalCollective).map_err(|e| e.to_string())?.to_bytes();
    let four = train(&data.split_round_robin(4), &edges, &params, &mut LocalCollective).map_err(|e| e.to_string())?.to_bytes();
    ensure!(one == four, "1-worker and 4-worker models differ");
    Ok(format!("{} model bytes identical", one.len()))
}

/// The enclave's acceptance test for one client's upload: `n_i` from the
/// first record, rows routed by index to `k` workers, each share decrypted,
/// then coverage of `1..=n_i`.
fn accepts(records: &[EncryptedRowRecord], key: &SymKey, k: usize) -> bool {
    let Some(total) = records.first().map(|r| r.total) else { return false };
    let mut shares = vec![Vec::new(); k];
    for r in records {
        shares[r.index.saturating_sub(1) as usize % k].push(r.clone());
    }
    let mut seen = Vec::new();
    for s in &shares {
        match decrypt_partition(s, key, total) {
            Ok(p) => seen.push(p.seen),
            Err(_) => return false,
        }
    }
    verify_coverage(total, &seen).is_ok()
}

fn tamper_suite() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(55);
    let key = SymKey::generate(&mut rng);
    let kinds = ["deletion", "duplication", "index substitution", "bit-flip", "n_i inconsistency"];
    let mut accepted = [0usize; 5];
    let mut trials = 0;
    for trial in 0..1500 {
        let n = rng.gen_range(2..40);
        let k = rng.gen_range(1..5);
        let rows: Vec<String> = (0..n).map(|_| format!("{},{:.4},{:.4}", rng.gen_range(0..2), rng.gen::<f64>(), rng.gen::<f64>())).collect();
        let mut recs = encrypt_dataset(&rows, &key, &mut rng);
        rng_shuffle(&mut recs, &mut rng);
        ensure!(accepts(&recs, &key, k), "unmodified upload rejected (trial {trial})");
        let kind = trial % 5;
        let i = rng.gen_range(0..recs.len());
        match kind {
            0 => {
                recs.remove(i);
            }
            1 => {
                let dup = recs[i].clone();
                recs.insert(rng.gen_range(0..=recs.len()), dup);
            }
            2 => {
                // Relabel one record, or swap two records' indices.
                let j = (i + rng.gen_range(1..recs.len())) % recs.len();
                if rng.gen_bool(0.5) {
                    recs[i].index = recs[j].index;
                } else {
                    let (a, b) = (recs[i].index, recs[j].index);
                    recs[i].index = b;
                    recs[j].index = a;
                }
            }
            3 => {
                let r = &mut recs[i];
                let bits = 8 * (r.nonce.len() + r.ciphertext.len() + r.tag.len());
                let bit = rng.gen_range(0..bits);
                let (byte, mask) = (bit / 8, 1u8 << (bit % 8));
                if byte < r.nonce.len() {
                    r.nonce[byte] ^= mask;
                } else if byte < r.nonce.len() + r.ciphertext.len() {
                    r.ciphertext[byte - r.nonce.len()] ^= mask;
                } else {
                    r.tag[byte - r.nonce.len() - r.ciphertext.len()] ^= mask;
                }
            }
            _ => {
                if rng.gen_bool(0.5) {
                    // Edited header on one record.
                    recs[i].total = loop {
                        let t = rng.gen_range(1..80);
                        if t != n as u32 {
                            break t;
                        }
                    };
                } else {
                    // Genuine record from an upload of a different size.
                    let mut other_rows = rows.clone();
                    other_rows.push(rows[0].clone());
                    let other = encrypt_dataset(&other_rows, &key, &mut rng);
                    recs[i] = other[rng.gen_range(0..other.len())].clone();
                }
            }
        }
        if accepts(&recs, &key, k) {
            accepted[kind] += 1;
        }
        trials += 1;
    }
    let forged: usize = accepted.iter().sum();
    ensure!(forged == 0, "accepted forgeries: {:?}", kinds.iter().zip(accepted).collect::<Vec<_>>());
    Ok(format!("{trials} trials over {} mutation kinds, 0 accepted", kinds.len()))
}

fn rng_shuffle<T>(v: &mut [T], rng: &mut ChaCha20Rng) {
    for i in (1..v.len()).rev() {
        v.swap(i, rng.gen_range(0..=i));
    }
}

fn consensus_suite() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(66);
    let ca = CertificateAuthority::generate(&mut rng);
    let clients: Vec<ClientIdentity> = ["alice", "bob", "carol"].iter().map(|n| ClientIdentity::generate(n, &ca, &mut rng)).collect();
    let enclave = EnclaveIdentity::generate([1; 32], &mut rng);
    let nonce = enclave.nonce;
    let mut gate = CommandGate::new(nonce);
    for c in &clients {
        gate.register(&c.name, c.public_key());
    }
    let params = |depth: &str| -> BTreeMap<String, String> { [("max_depth".to_string(), depth.to_string())].into() };
    let mut rng2 = rng.clone();
    let mut sign = |c: &ClientIdentity, nonce, ctr, depth: &str| make_signed_command(c, nonce, ctr, "train", params(depth), &mut rng2);
    let mut checked = 0;

    let mut reject = |gate: &mut CommandGate, set: &[SignedCommand], what: &str| -> std::result::Result<(), String> {
        let before = gate.next_ctr();
        ensure!(gate.admit(set).is_err(), "{what} was executed");
        ensure!(gate.next_ctr() == before, "{what} advanced the counter");
        checked += 1;
        Ok(())
    };

    for ctr in 1..=2u64 {
        let good: Vec<SignedCommand> = clients.iter().map(|c| sign(c, nonce, ctr, "3")).collect();
        // Missing: every proper subset of the clients.
        for mask in 0u8..7 {
            let subset: Vec<SignedCommand> = (0..3).filter(|i| mask & (1 << i) != 0).map(|i| good[i].clone()).collect();
            reject(&mut gate, &subset, &format!("subset {mask:03b}"))?;
        }
        for victim in 0..3 {
            let mut divergent = good.clone();
            divergent[victim] = sign(&clients[victim], nonce, ctr, "4");
            reject(&mut gate, &divergent, "divergent payload")?;
            let mut wrong = good.clone();
            wrong[victim] = sign(&clients[victim], [0xee; 16], ctr, "3");
            reject(&mut gate, &wrong, "wrong nonce (one client)")?;
        }
        let all_wrong: Vec<_> = clients.iter().map(|c| sign(c, [0xee; 16], ctr, "3")).collect();
        reject(&mut gate, &all_wrong, "wrong nonce (all clients)")?;
        // Valid set executes exactly once.
        let cmd = gate.admit(&good).map_err(|e| format!("valid set rejected: {e}"))?;
        ensure!(cmd.seqn.ctr == ctr, "executed ctr {}", cmd.seqn.ctr);
        // Replays: the whole set, and one stale signature among fresh ones.
        reject(&mut gate, &good, "full replay")?;
        let fresh: Vec<SignedCommand> = clients.iter().map(|c| sign(c, nonce, ctr + 1, "3")).collect();
        for victim in 0..3 {
            let mut mixed = fresh.clone();
            mixed[victim] = good[victim].clone();
            reject(&mut gate, &mixed, "partial replay")?;
        }
    }
    ensure!(gate.next_ctr() == 3, "counter at {}", gate.next_ctr());
    Ok(format!("{checked} rejected sets, 2 valid executions, 3 clients"))
}

fn accuracy() -> Outcome {
    let data = synth::separable(7, 1000, 10, 0.1);
    let mut params = TrainParams::default();
    for (k, v) in [("objective", "binary:logistic"), ("gamma", "0.1"), ("max_depth", "3"), ("num_rounds", "5")] {
        params.set(k, v).map_err(|e| e.to_string())?;
    }
    let (edges, model) = train_with_sketch(std::slice::from_ref(&data), &params, &mut LocalCollective).map_err(|e| e.to_string())?;
    let p = predict(&model, &data, Output::Probability).map_err(|e| e.to_string())?;
    let correct = p.iter().zip(data.labels()).filter(|(p, &y)| (**p >= 0.5) == (y == 1.0)).count();
    let acc = correct as f64 / data.len() as f64;
    ensure!(acc >= 0.95, "training accuracy {acc:.4} < 0.95");
    let reference = reference_train(&data, &edges, &params).map_err(|e| e.to_string())?;
    let rp = reference_predict(&reference, &data, Some(Objective::BinaryLogistic));
    let differ = p.iter().zip(&rp).filter(|(a, b)| a.to_bits() != b.to_bits()).count();
    ensure!(differ == 0, "{differ} predictions differ from the reference");
    Ok(format!("accuracy {acc:.4}, 1000/1000 predictions identical to reference"))
}

fn bench_slowdown() -> Outcome {
    let r = bench::run(bench::BenchConfig::default()).map_err(|e| e.to_string())?;
    for line in r.to_string().lines() {
        println!("      {line}");
    }
    let s = r.slowdown();
    ensure!(s.is_finite() && s > 0.0, "slowdown {s}");
    Ok(format!("oblivious/reference slowdown {s:.2}x (not bounded)"))
}

fn gradient_check() -> Outcome {
    let loss = |m: f64, y: f64| {
        let p = objective::sigmoid(m);
        -y * p.ln() - (1.0 - y) * (1.0 - p).ln()
    };
    let step = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let margins: Vec<f64> = (0..100).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let labels: Vec<f64> = (0..100).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect();
    let grads = compute_gradients(&margins, &labels, Objective::BinaryLogistic);
    let mut worst: f64 = 0.0;
    for ((&m, &y), gp) in margins.iter().zip(&labels).zip(&grads) {
        let g = (loss(m + step, y) - loss(m - step, y)) / (2.0 * step);
        let up = compute_gradients(&[m + step], &[y], Objective::BinaryLogistic)[0].g;
        let down = compute_gradients(&[m - step], &[y], Objective::BinaryLogistic)[0].g;
        let h = (up - down) / (2.0 * step);
        worst = worst.max((gp.g - g).abs()).max((gp.h - h).abs());
        ensure!((gp.g - g).abs() <= 1e-6, "g at m={m}, y={y}: {} vs {g}", gp.g);
        ensure!((gp.h - h).abs() <= 1e-6, "h at m={m}, y={y}: {} vs {h}", gp.h);
    }
    Ok(format!("100 points, max error {worst:.2e}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("trace independence", trace_independence),
        ("bitonic comparator counts", bitonic_counts),
        ("worker invariance", worker_invariance),
        ("tamper and coverage", tamper_suite),
        ("consensus and replay", consensus_suite),
        ("accuracy, logistic D=3 gamma=0.1 5 rounds", accuracy),
        ("oblivious slowdown", bench_slowdown),
        ("gradient check", gradient_check),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match result {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}

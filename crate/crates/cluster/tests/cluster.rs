use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sxgb_cluster::codec::{decode_histograms, encode_histograms};
use sxgb_cluster::sim::params;
use sxgb_cluster::*;
use sxgb_core::fixed::Fixed;
use sxgb_core::histogram::HistBin;
use sxgb_core::{synth, train_with_sketch, Dataset, LocalCollective, TrainParams};
use sxgb_protocol::{Outcome, ProtocolError};

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn cluster(nodes: usize, seed: u64) -> Cluster {
    let mut r = rng(seed);
    let platform = PlatformKey::generate(&mut r);
    let enclaves = launch(&vec![default_manifest(); nodes], &platform, &mut r);
    attest_cluster(Topology::binary(nodes), enclaves, &platform.public_key(), &mut r).unwrap()
}

fn csv(data: &Dataset) -> Vec<String> {
    data.rows().zip(data.labels()).map(|(x, &y)| Dataset::format_row(y, x)).collect()
}

#[test]
fn attestation() {
    let mut r = rng(1);
    let platform = PlatformKey::generate(&mut r);
    let c = attest_cluster(Topology::binary(4), launch(&vec![default_manifest(); 4], &platform, &mut r), &platform.public_key(), &mut r)
        .unwrap();
    assert_eq!(c.session_count(), 3);

    let mut manifests = vec![default_manifest(); 4];
    manifests[3].extend_from_slice(b"patched\n");
    let nodes = launch(&manifests, &platform, &mut r);
    let err = attest_cluster(Topology::binary(4), nodes, &platform.public_key(), &mut r).err().unwrap();
    assert!(matches!(err, ClusterError::MeasurementMismatch { node: 3 }), "{err}");

    let mut report = c.master().report.clone();
    report.nonce[0] ^= 1;
    assert!(matches!(report.verify(&platform.public_key(), &measure(&default_manifest()), 0), Err(ClusterError::AttestationSignatureInvalid)));
    let rogue = PlatformKey::generate(&mut r);
    assert!(matches!(
        c.master().report.verify(&rogue.public_key(), &measure(&default_manifest()), 0),
        Err(ClusterError::AttestationSignatureInvalid)
    ));
    let back = AttestationReport::from_json(&c.master().report.to_json()).unwrap();
    assert_eq!(back, c.master().report);
}

#[test]
fn reduce_and_broadcast() {
    let c = cluster(4, 2);
    let per_node: Vec<Vec<HistBin>> =
        (0..4).map(|i| (0..5).map(|b| HistBin { g: Fixed(i * 100 + b), h: Fixed(b), count: 1 }).collect()).collect();
    let central: Vec<HistBin> =
        (0..5).map(|b| per_node.iter().fold(HistBin::ZERO, |acc, h| acc.add(h[b]))).collect();
    let sum = |a: Vec<HistBin>, b: Vec<HistBin>| Ok(a.iter().zip(&b).map(|(x, y)| x.add(*y)).collect());
    let all = c.allreduce(per_node, encode_histograms, decode_histograms, sum).unwrap();
    assert!(all.iter().all(|h| *h == central));
    assert_eq!(c.broadcast(b"hello").unwrap(), vec![b"hello".to_vec(); 4]);
    // Every frame on the wire is sealed.
    assert!(!c.wire().contains(b"hello"));

    let single = cluster(1, 3);
    let v = vec![vec![HistBin { g: Fixed(7), h: Fixed(1), count: 2 }]];
    assert_eq!(single.reduce(v.clone(), encode_histograms, decode_histograms, sum).unwrap(), v[0]);
}

#[test]
fn cluster_training_matches_local() {
    let c = cluster(4, 4);
    let data = synth::random_grid(5, 203, 4, 10);
    let parts = data.split_round_robin(4);
    let p = TrainParams { num_rounds: 3, max_depth: 3, num_bins: 8, ..TrainParams::default() };
    let (_, local) = train_with_sketch(&parts, &p, &mut LocalCollective).unwrap();
    let (_, remote) = train_with_sketch(&parts, &p, &mut ClusterCollective { cluster: &c }).unwrap();
    assert_eq!(local.to_bytes(), remote.to_bytes());
}

fn connected(names: &[&str], nodes: usize, seed: u64) -> Simulation {
    let mut sim = Simulation::new(names, nodes, &mut rng(seed)).unwrap();
    sim.connect().unwrap();
    sim
}

#[test]
fn end_to_end_with_leak_scan() {
    let mut sim = connected(&["alice", "bob"], 4, 5);
    // Distinctive feature value planted in alice's rows.
    let sentinel = 7345.918273645;
    let mut a = synth::separable(6, 60, 3, 0.2);
    let mut rows = csv(&a);
    rows[10] = Dataset::format_row(1.0, &[sentinel, 0.5, 0.5]);
    a = Dataset::from_rows(&rows.iter().map(|r| Dataset::parse_row(r).unwrap().1).collect::<Vec<_>>(), a.labels().to_vec()).unwrap();
    let b = synth::separable(7, 40, 3, 0.2);
    sim.upload(0, "a.enc", &csv(&a)).unwrap();
    sim.upload(1, "b.enc", &csv(&b)).unwrap();
    sim.upload(0, "a_test.enc", &csv(&a)[..5]).unwrap();

    let early = sim.call("predict", &params([("data.alice", "a_test.enc".into())])).unwrap();
    assert_eq!(early, vec![Err("no dataset".to_string()); 2]);

    let load = params([("data.alice", "a.enc".into()), ("data.bob", "b.enc".into())]);
    let loaded = sim.call("load_dmatrix", &load).unwrap();
    assert_eq!(loaded, vec![Ok(b"rows=60".to_vec()), Ok(b"rows=40".to_vec())]);

    let train = params([("max_depth", "3".into()), ("num_rounds", "5".into()), ("gamma", "0.1".into())]);
    let models = sim.call("train", &train).unwrap();
    let bytes = models[0].clone().unwrap();
    assert_eq!(models[1].as_ref().unwrap(), &bytes);
    assert_eq!(sim.service.master.model().unwrap().to_bytes(), bytes);

    let preds = sim.call("predict", &params([("data.alice", "a_test.enc".into())])).unwrap();
    let text = String::from_utf8(preds[0].clone().unwrap()).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().all(|l| (0.0..=1.0).contains(&l.parse::<f64>().unwrap())));
    // Bob sees an error for a result that is not his.
    assert_eq!(preds[1], Err("no result for bob".to_string()));

    let got = sim.call("get_model", &Default::default()).unwrap();
    assert_eq!(got[1].as_ref().unwrap(), &bytes);

    let wire = sim.service.master.cluster().wire();
    assert!(!wire.is_empty());
    for needle in [sentinel.to_le_bytes().to_vec(), sentinel.to_string().into_bytes(), rows[10].clone().into_bytes()] {
        assert!(!wire.contains(&needle));
    }
    // Negative control: the scan does find a plaintext that is sent raw.
    wire.record(0, 1, &sentinel.to_le_bytes());
    assert!(wire.contains(&sentinel.to_le_bytes()));
}

#[test]
fn cluster_model_equals_library_model() {
    let run = |seed| {
        let mut sim = connected(&["a", "b", "c"], 3, seed);
        let data: Vec<Dataset> = (0..3).map(|i| synth::random_grid(10 + i, 30, 2, 6)).collect();
        for (i, d) in data.iter().enumerate() {
            sim.upload(i, &format!("{i}.enc"), &csv(d)).unwrap();
        }
        let load = params([("data.a", "0.enc".into()), ("data.b", "1.enc".into()), ("data.c", "2.enc".into())]);
        sim.call("load_dmatrix", &load).unwrap();
        let model = sim.call("train", &params([("max_depth", "2".into()), ("num_rounds", "3".into())])).unwrap()[0].clone().unwrap();

        // Same row routing done by hand: row j of each client goes to worker (j-1) % 3.
        let mut parts = vec![Dataset::empty(2); 3];
        for d in &data {
            for (i, (x, &y)) in d.rows().zip(d.labels()).enumerate() {
                parts[i % 3].push_row(y, x).unwrap();
            }
        }
        let p = TrainParams { max_depth: 2, num_rounds: 3, ..TrainParams::default() };
        let (_, direct) = train_with_sketch(&parts, &p, &mut LocalCollective).unwrap();
        assert_eq!(direct.to_bytes(), model);
        model
    };
    assert_eq!(run(20), run(21));
}

#[test]
fn command_state_machine() {
    let mut sim = connected(&["a", "b", "c"], 2, 8);
    let d = synth::uniform(1, 20, 2);
    for i in 0..3 {
        sim.upload(i, "x.enc", &csv(&d)).unwrap();
    }
    let load = params([("data.a", "x.enc".into()), ("data.b", "x.enc".into()), ("data.c", "x.enc".into())]);

    // Partial submission: nothing runs.
    assert_eq!(sim.submit(&[0, 1], "load_dmatrix", &load).unwrap(), None);
    assert_eq!(sim.service.master.executed(), 0);
    // Third client completes the set; exactly one execution.
    assert!(matches!(sim.submit(&[2], "load_dmatrix", &load).unwrap(), Some(Reply::Response(_))));
    assert_eq!(sim.service.master.executed(), 1);
    assert_eq!(sim.service.pump(), 0);

    // A replayed set relayed by a malicious orchestrator is refused.
    let replay: Vec<_> = (0..3)
        .map(|i| {
            let mut s = ClientSession::new(
                sxgb_protocol::ClientIdentity {
                    name: sim.sessions[i].identity.name.clone(),
                    sym_key: sim.sessions[i].identity.sym_key.clone(),
                    sign_key: sim.sessions[i].identity.sign_key.clone(),
                    certificate: sim.sessions[i].identity.certificate.clone(),
                },
                sim.platform.public_key(),
                measure(&default_manifest()),
            );
            s.attest(sim.service.master.report()).unwrap();
            s.command("load_dmatrix", load.clone()).unwrap()
        })
        .collect();
    assert!(matches!(sim.service.master.execute(&replay), Err(ClusterError::Protocol(ProtocolError::StaleSequence { .. }))));

    // Out of order: a client skips a counter value.
    sim.sessions[0].command("noop", Default::default()).unwrap();
    let reply = sim.submit(&[0, 1, 2], "get_model", &Default::default()).unwrap();
    assert_eq!(reply, None);

    // Dropped signature.
    let set: Vec<_> = (1..3).map(|i| sim.sessions[i].command("get_model", Default::default()).unwrap()).collect();
    assert!(matches!(sim.service.master.execute(&set), Err(ClusterError::Protocol(ProtocolError::MissingClient(_)))));
    assert_eq!(sim.service.master.executed(), 1);
    assert!(sim.service.master.model().is_none());
}

#[test]
fn orchestrator_buffers_until_complete() {
    let mut sim = connected(&["a", "b", "c"], 1, 9);
    let cmds: Vec<_> = (0..3).map(|i| sim.sessions[i].command("get_model", Default::default()).unwrap()).collect();
    let mut o = Orchestrator::new(["a", "b", "c"].map(String::from));
    let q = o.submit(cmds[0].clone()).unwrap();
    o.submit(cmds[1].clone()).unwrap();
    assert!(o.dispatch().is_none());
    assert_eq!(o.pending(&q), 2);
    o.submit(cmds[2].clone()).unwrap();
    let (seqn, set) = o.dispatch().unwrap();
    assert_eq!((seqn, set.len()), (q, 3));
    assert!(o.dispatch().is_none());
    o.submit(cmds[0].clone()).unwrap();
    assert!(o.dispatch().is_none(), "a set is relayed at most once");
    let mut outsider = cmds[0].clone();
    outsider.signer = "eve".into();
    assert!(matches!(o.submit(outsider), Err(ClusterError::Protocol(ProtocolError::UnknownClient(_)))));
}

#[test]
fn channel_failure_aborts_with_signed_error() {
    let mut sim = connected(&["a"], 3, 10);
    sim.upload(0, "x.enc", &csv(&synth::uniform(2, 30, 2))).unwrap();
    sim.call("load_dmatrix", &params([("data.a", "x.enc".into())])).unwrap();
    sim.service.master.cluster().inject_fault(2, 0);
    let seqn = sim.sessions[0].next_seqn().unwrap();
    let Some(Reply::Response(r)) = sim.submit(&[0], "train", &Default::default()).unwrap() else { panic!() };
    let body = sim.sessions[0].verify(&seqn, &r).unwrap();
    assert!(matches!(body.outcome, Outcome::Error(ref m) if m.contains("authentication failed")), "{:?}", body.outcome);
    assert!(sim.service.master.model().is_none());
}

#[test]
fn tampered_rows_fail_the_load() {
    let mut sim = connected(&["a"], 2, 11);
    sim.upload(0, "x.enc", &csv(&synth::uniform(3, 9, 2))).unwrap();
    let storage = sim.service.master.storage_mut();
    let mut records = sxgb_protocol::rows::decode_records(&storage.get("x.enc").unwrap()).unwrap();
    records.remove(4);
    storage.put("y.enc", sxgb_protocol::rows::encode_records(&records)).unwrap();
    let out = sim.call("load_dmatrix", &params([("data.a", "y.enc".into())])).unwrap();
    let msg = out[0].clone().unwrap_err();
    assert!(msg.contains("missing [5]"), "{msg}");
}

use std::net::TcpListener;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sxgb_cluster::sim::params;
use sxgb_cluster::*;
use sxgb_core::{synth, Dataset};
use sxgb_protocol::rows::{encode_records, encrypt_dataset};
use sxgb_protocol::{CertificateAuthority, ClientIdentity, Deployment};

#[test]
fn services_over_sockets() {
    let mut rng = ChaCha20Rng::seed_from_u64(30);
    let ca = CertificateAuthority::generate(&mut rng);
    let platform = PlatformKey::generate(&mut rng);
    let names = ["a", "b"];
    let dir = tempfile::tempdir().unwrap();
    let deployment = Deployment { clients: names.iter().map(|s| s.to_string()).collect(), ca: ca.public_key() };
    let nodes = launch(&vec![default_manifest(); 3], &platform, &mut rng);
    let cluster = attest_cluster(Topology::binary(3), nodes, &platform.public_key(), &mut rng).unwrap();
    let master = MasterService::new(cluster, deployment, DirStorage { root: dir.path().to_path_buf() });

    let enclave = TcpListener::bind("127.0.0.1:0").unwrap();
    let enclave_addr = enclave.local_addr().unwrap();
    std::thread::spawn(move || net::serve_enclave(enclave, master));
    let orch = TcpListener::bind("127.0.0.1:0").unwrap();
    let orch_addr = orch.local_addr().unwrap();
    let link = net::EnclaveLink::connect(enclave_addr).unwrap();
    std::thread::spawn(move || net::serve_orchestrator(orch, Orchestrator::new(names.map(String::from)), link));

    let mut sessions = Vec::new();
    let mut conns = Vec::new();
    for n in names {
        let id = ClientIdentity::generate(n, &ca, &mut rng);
        let data = synth::uniform(n.len() as u64, 25, 2);
        let rows: Vec<String> = data.rows().zip(data.labels()).map(|(x, &y)| Dataset::format_row(y, x)).collect();
        std::fs::write(dir.path().join(format!("{n}.enc")), encode_records(&encrypt_dataset(&rows, &id.sym_key, &mut rng))).unwrap();
        let mut s = ClientSession::new(id, platform.public_key(), measure(&default_manifest()));
        let mut c = net::RemoteOrchestrator::connect(orch_addr).unwrap();
        s.attest(&c.attest().unwrap()).unwrap();
        c.enroll(&s.enrollment().unwrap()).unwrap();
        sessions.push(s);
        conns.push(c);
    }

    let mut run = |func: &str, p: sim::Params| {
        let seqn = sessions[0].next_seqn().unwrap();
        for (s, c) in sessions.iter_mut().zip(conns.iter_mut()) {
            assert_eq!(c.fetch(&seqn).unwrap(), None);
            c.submit(s.command(func, p.clone()).unwrap()).unwrap();
        }
        let Some(Reply::Response(r)) = conns[1].fetch(&seqn).unwrap() else { panic!("{func} not executed") };
        sessions.iter().map(|s| s.open(&seqn, &r).unwrap()).collect::<Vec<_>>()
    };
    let loaded = run("load_dmatrix", params([("data.a", "a.enc".into()), ("data.b", "b.enc".into())]));
    assert_eq!(loaded, vec![Ok(b"rows=25".to_vec()); 2]);
    let models = run("train", params([("max_depth", "2".into()), ("num_rounds", "2".into())]));
    assert_eq!(models[0], models[1]);
    let preds = run("predict", params([("data.b", "b.enc".into())]));
    assert!(preds[0].is_err());
    assert_eq!(String::from_utf8(preds[1].clone().unwrap()).unwrap().lines().count(), 25);
}

//! Clients, orchestrator and a k-node cluster in one process.

use std::collections::BTreeMap;

use sxgb_protocol::rows::{encode_records, encrypt_dataset};
use sxgb_protocol::{CertificateAuthority, ClientIdentity, Deployment, Rng};

use crate::attest::{default_manifest, measure, PlatformKey};
use crate::client::ClientSession;
use crate::cluster::{attest_cluster, launch};
use crate::endpoint::{Endpoint, InProcess};
use crate::error::{ClusterError, Result};
use crate::master::MasterService;
use crate::orchestrator::{Orchestrator, Reply};
use crate::storage::{MemoryStorage, Storage};
use crate::topology::Topology;

pub type Params = BTreeMap<String, String>;

pub struct Simulation {
    pub ca: CertificateAuthority,
    pub platform: PlatformKey,
    pub sessions: Vec<ClientSession>,
    pub service: InProcess<MemoryStorage>,
}

impl Simulation {
    /// Clients named `names` and a binary tree of `nodes` enclaves running
    /// the built-in manifest. Nothing is attested or enrolled yet.
    pub fn new(names: &[&str], nodes: usize, rng: &mut impl Rng) -> Result<Self> {
        let ca = CertificateAuthority::generate(rng);
        let platform = PlatformKey::generate(rng);
        let manifest = default_manifest();
        let enclaves = launch(&vec![manifest.clone(); nodes], &platform, rng);
        let cluster = attest_cluster(Topology::binary(nodes), enclaves, &platform.public_key(), rng)?;
        let deployment = Deployment { clients: names.iter().map(|s| s.to_string()).collect(), ca: ca.public_key() };
        let sessions = names
            .iter()
            .map(|n| ClientSession::new(ClientIdentity::generate(n, &ca, rng), platform.public_key(), measure(&manifest)))
            .collect();
        let service = InProcess {
            orchestrator: Orchestrator::new(names.iter().map(|s| s.to_string())),
            master: MasterService::new(cluster, deployment, MemoryStorage::default()),
        };
        Ok(Simulation { ca, platform, sessions, service })
    }

    /// Every client verifies the master's report and enrolls its key.
    pub fn connect(&mut self) -> Result<()> {
        let report = self.service.attest()?;
        for s in &mut self.sessions {
            s.attest(&report)?;
            let msg = s.enrollment()?;
            self.service.enroll(&msg)?;
        }
        Ok(())
    }

    /// Encrypts `rows` under client `i`'s key into blob `name`.
    pub fn upload(&mut self, i: usize, name: &str, rows: &[String]) -> Result<()> {
        let key = self.sessions[i].identity.sym_key.clone();
        let records = encrypt_dataset(rows, &key, &mut rand::thread_rng());
        self.service.master.storage_mut().put(name, encode_records(&records))
    }

    /// Clients `who` submit `func(params)`; returns the orchestrator's reply,
    /// or `None` when nothing was executed.
    pub fn submit(&mut self, who: &[usize], func: &str, params: &Params) -> Result<Option<Reply>> {
        let mut seqn = None;
        for &i in who {
            let cmd = self.sessions[i].command(func, params.clone())?;
            seqn = Some(self.service.submit(cmd)?);
        }
        match seqn {
            Some(q) => self.service.fetch(&q),
            None => Ok(None),
        }
    }

    /// All clients call `func(params)`; returns what each client decrypted,
    /// or the enclave's signed error.
    pub fn call(&mut self, func: &str, params: &Params) -> Result<Vec<std::result::Result<Vec<u8>, String>>> {
        let seqn = self.sessions[0].next_seqn()?;
        let all: Vec<usize> = (0..self.sessions.len()).collect();
        match self.submit(&all, func, params)? {
            Some(Reply::Response(r)) => self.sessions.iter().map(|s| s.open(&seqn, &r)).collect(),
            Some(Reply::Rejected(m)) => Err(ClusterError::Transport(format!("rejected: {m}"))),
            None => Err(ClusterError::Transport(format!("{func} was not executed"))),
        }
    }
}

pub fn params<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> Params {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

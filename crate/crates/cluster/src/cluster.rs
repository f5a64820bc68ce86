//! Enclave nodes arranged in a tree, attested parent by parent.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rsa::RsaPublicKey;
use sxgb_protocol::wire::{unwrap, wrap};
use sxgb_protocol::{EnclaveIdentity, Rng, SymKey};

use crate::attest::{measure, AttestationReport, PlatformKey};
use crate::channel::{open, seal, Wire};
use crate::error::{ClusterError, Result};
use crate::topology::Topology;

pub struct EnclaveNode {
    pub id: usize,
    pub identity: EnclaveIdentity,
    pub report: AttestationReport,
    client_keys: Mutex<BTreeMap<String, SymKey>>,
}

impl EnclaveNode {
    pub fn client_key(&self, name: &str) -> Option<SymKey> {
        self.client_keys.lock().unwrap().get(name).cloned()
    }

    pub fn client_names(&self) -> Vec<String> {
        self.client_keys.lock().unwrap().keys().cloned().collect()
    }
}

/// Starts one enclave per manifest; node `i` loads `manifests[i]`.
pub fn launch(manifests: &[Vec<u8>], platform: &PlatformKey, rng: &mut impl Rng) -> Vec<EnclaveNode> {
    manifests
        .iter()
        .enumerate()
        .map(|(id, m)| {
            let identity = EnclaveIdentity::generate(measure(m), rng);
            let report = platform.report(&identity, rng);
            EnclaveNode { id, identity, report, client_keys: Mutex::new(BTreeMap::new()) }
        })
        .collect()
}

pub struct Cluster {
    topology: Topology,
    nodes: Vec<EnclaveNode>,
    /// Session key per edge, indexed by the child's id.
    sessions: BTreeMap<usize, SymKey>,
    wire: Arc<Wire>,
    fault: Mutex<Option<(usize, usize)>>,
}

/// Each parent checks its children's reports against its own measurement
/// and hands them a fresh session key wrapped under their RSA key.
pub fn attest_cluster(topology: Topology, nodes: Vec<EnclaveNode>, platform: &RsaPublicKey, rng: &mut impl Rng) -> Result<Cluster> {
    if nodes.len() != topology.len() {
        return Err(ClusterError::Topology(format!("{} nodes for a {}-node topology", nodes.len(), topology.len())));
    }
    let wire = Arc::new(Wire::default());
    let mut sessions = BTreeMap::new();
    for (p, c) in topology.edges() {
        nodes[c].report.verify(platform, &nodes[p].identity.measurement, c)?;
        let key = SymKey::generate(rng);
        let wrapped = wrap(&nodes[c].report.public_key, key.as_bytes(), rng)?;
        wire.record(p, c, &wrapped);
        let received = SymKey::from_bytes(&unwrap(&nodes[c].identity.key, &wrapped)?)?;
        sessions.insert(c, received);
    }
    Ok(Cluster { topology, nodes, sessions, wire, fault: Mutex::new(None) })
}

impl Cluster {
    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: usize) -> &EnclaveNode {
        &self.nodes[id]
    }

    pub fn master(&self) -> &EnclaveNode {
        &self.nodes[0]
    }

    pub fn wire(&self) -> &Arc<Wire> {
        &self.wire
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    /// Corrupts the next message on the `from -> to` channel.
    pub fn inject_fault(&self, from: usize, to: usize) {
        *self.fault.lock().unwrap() = Some((from, to));
    }

    /// Sends `msg` over the sealed channel between adjacent nodes and returns
    /// what the receiver decrypted.
    pub fn transfer(&self, from: usize, to: usize, msg: &[u8]) -> Result<Vec<u8>> {
        let child = match (self.topology.parent(from), self.topology.parent(to)) {
            (Some(p), _) if p == to => from,
            (_, Some(p)) if p == from => to,
            _ => return Err(ClusterError::Channel { from, to, reason: "nodes are not adjacent".into() }),
        };
        let key = &self.sessions[&child];
        let mut envelope = seal(key, from, to, msg);
        if self.fault.lock().unwrap().take_if(|f| *f == (from, to)).is_some() {
            envelope[12] ^= 1;
        }
        self.wire.record(from, to, &envelope);
        open(key, from, to, &envelope)
    }

    /// Master-to-all broadcast down the tree. Returns the bytes each node
    /// received, indexed by node.
    pub fn broadcast(&self, msg: &[u8]) -> Result<Vec<Vec<u8>>> {
        let mut got: Vec<Option<Vec<u8>>> = vec![None; self.len()];
        got[0] = Some(msg.to_vec());
        for node in self.topology.bfs() {
            for &c in self.topology.children(node) {
                let m = self.transfer(node, c, got[node].as_ref().unwrap())?;
                got[c] = Some(m);
            }
        }
        Ok(got.into_iter().map(Option::unwrap).collect())
    }

    /// Folds one value per node up the tree. Each parent combines its own
    /// value with its children's, children in ascending id order, and
    /// forwards the result. Returns the master's result.
    pub fn reduce<T>(
        &self,
        values: Vec<T>,
        encode: impl Fn(&T) -> Vec<u8>,
        decode: impl Fn(&[u8]) -> Result<T>,
        combine: impl Fn(T, T) -> Result<T>,
    ) -> Result<T> {
        if values.len() != self.len() {
            return Err(ClusterError::Topology(format!("{} values for {} nodes", values.len(), self.len())));
        }
        let mut acc: Vec<Option<T>> = values.into_iter().map(Some).collect();
        for &node in self.topology.bfs().iter().rev() {
            let mut mine = acc[node].take().unwrap();
            for &c in self.topology.children(node) {
                let bytes = encode(acc[c].as_ref().unwrap());
                mine = combine(mine, decode(&self.transfer(c, node, &bytes)?)?)?;
                acc[c] = None;
            }
            acc[node] = Some(mine);
        }
        Ok(acc[0].take().unwrap())
    }

    /// Reduce to the master, then broadcast the result back to every node.
    pub fn allreduce<T>(
        &self,
        values: Vec<T>,
        encode: impl Fn(&T) -> Vec<u8>,
        decode: impl Fn(&[u8]) -> Result<T>,
        combine: impl Fn(T, T) -> Result<T>,
    ) -> Result<Vec<T>> {
        let total = self.reduce(values, &encode, &decode, combine)?;
        self.broadcast(&encode(&total))?.iter().map(|b| decode(b)).collect()
    }

    /// Hands an enrolled client's key from the master to every enclave.
    pub fn percolate_key(&self, name: &str, key: &SymKey) -> Result<()> {
        let received = self.broadcast(key.as_bytes())?;
        for (node, bytes) in self.nodes.iter().zip(received) {
            node.client_keys.lock().unwrap().insert(name.to_string(), SymKey::from_bytes(&bytes)?);
        }
        Ok(())
    }
}

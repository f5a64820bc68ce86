//! The master enclave: enrollment, command admission and the API handlers.

use std::collections::BTreeMap;

use sxgb_core::{predict, train_with_sketch, Dataset, Model, Objective, Output, TrainParams};
use sxgb_protocol::command::Command;
use sxgb_protocol::rows::{decode_records, decrypt_partition, EncryptedRowRecord};
use sxgb_protocol::{
    check_indices, sign_response, verify_enrollment, Deployment, EnrollmentMessage, Outcome, ProtocolError, ResponseBody,
    SealedBlob, SignedCommand, SignedResponse, SymKey,
};

use crate::attest::AttestationReport;
use crate::cluster::Cluster;
use crate::codec::{decode_indices, encode_indices};
use crate::collective::ClusterCollective;
use crate::error::Result;
use crate::storage::Storage;

type HandlerResult = std::result::Result<Vec<(String, Vec<u8>)>, String>;

pub struct MasterService<S> {
    cluster: Cluster,
    deployment: Deployment,
    gate: sxgb_protocol::CommandGate,
    storage: S,
    data: Option<Vec<Dataset>>,
    model: Option<(Model, Objective)>,
    executed: u64,
}

impl<S: Storage> MasterService<S> {
    pub fn new(cluster: Cluster, deployment: Deployment, storage: S) -> Self {
        let gate = sxgb_protocol::CommandGate::new(cluster.master().identity.nonce);
        MasterService { cluster, deployment, gate, storage, data: None, model: None, executed: 0 }
    }

    pub fn report(&self) -> &AttestationReport {
        &self.cluster.master().report
    }

    pub fn cluster(&self) -> &Cluster {
        &self.cluster
    }

    pub fn storage_mut(&mut self) -> &mut S {
        &mut self.storage
    }

    pub fn model(&self) -> Option<&Model> {
        self.model.as_ref().map(|m| &m.0)
    }

    /// Number of command sets that passed admission.
    pub fn executed(&self) -> u64 {
        self.executed
    }

    pub fn enroll(&mut self, msg: &EnrollmentMessage) -> Result<()> {
        let e = verify_enrollment(&self.deployment, &self.cluster.master().identity, msg)?;
        self.cluster.percolate_key(&e.name, &e.sym_key)?;
        self.gate.register(&e.name, e.public_key);
        log::info!("enrolled {}", e.name);
        Ok(())
    }

    /// Admits the command set and runs it. Admission failures are returned
    /// as errors and change no state; handler failures come back as signed
    /// error responses.
    pub fn execute(&mut self, set: &[SignedCommand]) -> Result<SignedResponse> {
        let enrolled: Vec<&str> = self.gate.clients().collect();
        if let Some(name) = self.deployment.clients.iter().find(|n| !enrolled.contains(&n.as_str())) {
            return Err(ProtocolError::MissingClient(name.clone()).into());
        }
        let cmd = self.gate.admit(set)?;
        self.executed += 1;
        log::info!("executing {} (ctr {})", cmd.func, cmd.seqn.ctr);
        let outcome = match cmd.func.as_str() {
            "load_dmatrix" => self.load_dmatrix(&cmd),
            "train" => self.train(&cmd),
            "predict" => self.predict(&cmd),
            "get_model" => self.get_model(),
            other => Err(format!("unknown function {other:?}")),
        };
        let mut rng = rand::thread_rng();
        let body = match outcome {
            Ok(results) => {
                let mut sealed = Vec::with_capacity(results.len());
                for (name, plaintext) in results {
                    let key = self.client_key(&name)?;
                    sealed.push(SealedBlob::seal(&cmd.seqn, &name, &key, &plaintext, &mut rng));
                }
                ResponseBody { seqn: cmd.seqn, outcome: Outcome::Ok, sealed }
            }
            Err(message) => ResponseBody { seqn: cmd.seqn, outcome: Outcome::Error(message), sealed: Vec::new() },
        };
        Ok(sign_response(&self.cluster.master().identity.key, &body, &mut rng))
    }

    fn client_key(&self, name: &str) -> Result<SymKey> {
        self.cluster.master().client_key(name).ok_or_else(|| ProtocolError::UnknownClient(name.to_string()).into())
    }

    fn clients(&self) -> Vec<String> {
        self.gate.clients().map(String::from).collect()
    }

    fn records(&self, cmd: &Command, name: &str) -> std::result::Result<Vec<EncryptedRowRecord>, String> {
        let blob = cmd.param(&format!("data.{name}")).ok_or_else(|| format!("missing parameter data.{name}"))?;
        let bytes = self.storage.get(blob).map_err(|e| e.to_string())?;
        decode_records(&bytes).map_err(|e| format!("{name}: {e}"))
    }

    /// Routes each client's records to workers by row index, has every
    /// worker decrypt its share, and checks at the master that the shares
    /// cover `1..=n_i` exactly once.
    fn load_dmatrix(&mut self, cmd: &Command) -> HandlerResult {
        let k = self.cluster.len();
        let mut rows: Vec<Vec<(f64, Vec<f64>)>> = vec![Vec::new(); k];
        let mut width = None;
        let mut results = Vec::new();
        for name in self.clients() {
            let records = self.records(cmd, &name)?;
            let total = records.first().map(|r| r.total).ok_or_else(|| format!("{name}: empty dataset"))?;
            let mut routed: Vec<Vec<EncryptedRowRecord>> = vec![Vec::new(); k];
            for r in records {
                routed[r.index.saturating_sub(1) as usize % k].push(r);
            }
            let mut seen = Vec::with_capacity(k);
            for (w, share) in routed.iter().enumerate() {
                let key = self.cluster.node(w).client_key(&name).ok_or_else(|| format!("{name} not enrolled at node {w}"))?;
                let part = decrypt_partition(share, &key, total).map_err(|e| format!("{name}: {e}"))?;
                for (j, line) in &part.rows {
                    let (label, x) = Dataset::parse_row(line).map_err(|_| format!("{name}: row {j} is malformed"))?;
                    if *width.get_or_insert(x.len()) != x.len() {
                        return Err(format!("{name}: row {j} has {} features, expected {}", x.len(), width.unwrap()));
                    }
                    rows[w].push((label, x));
                }
                seen.push(part.seen.into_iter().collect::<Vec<u32>>());
            }
            let all = self
                .cluster
                .reduce(
                    seen,
                    encode_indices,
                    decode_indices,
                    |mut a, b| {
                        a.extend(b);
                        Ok(a)
                    },
                )
                .map_err(|e| e.to_string())?;
            check_indices(total, all).map_err(|e| format!("{name}: {e}"))?;
            results.push((name, format!("rows={total}").into_bytes()));
        }
        let d = width.ok_or("no rows loaded")?;
        let mut parts = Vec::with_capacity(k);
        for worker in rows {
            let mut ds = Dataset::empty(d);
            for (label, x) in worker {
                ds.push_row(label, &x).map_err(|e| e.to_string())?;
            }
            parts.push(ds);
        }
        self.data = Some(parts);
        self.model = None;
        Ok(results)
    }

    fn train(&mut self, cmd: &Command) -> HandlerResult {
        let parts = self.data.as_ref().ok_or("no dataset")?;
        let params = train_params(&cmd.params).map_err(|e| e.to_string())?;
        let (_, model) =
            train_with_sketch(parts, &params, &mut ClusterCollective { cluster: &self.cluster }).map_err(|e| e.to_string())?;
        let bytes = model.to_bytes();
        self.model = Some((model, params.objective));
        Ok(self.clients().into_iter().map(|n| (n, bytes.clone())).collect())
    }

    /// Scores each listed client's test file; only that client can open the
    /// resulting predictions.
    fn predict(&mut self, cmd: &Command) -> HandlerResult {
        self.data.as_ref().ok_or("no dataset")?;
        let (model, objective) = self.model.as_ref().ok_or("no model")?;
        let output = match objective {
            Objective::BinaryLogistic => Output::Probability,
            Objective::SquaredError => Output::Margin,
        };
        let mut results = Vec::new();
        for name in self.clients() {
            if cmd.param(&format!("data.{name}")).is_none() {
                continue;
            }
            let records = self.records(cmd, &name)?;
            let total = records.first().map_or(0, |r| r.total);
            let key = self.client_key(&name).map_err(|e| e.to_string())?;
            let part = decrypt_partition(&records, &key, total).map_err(|e| format!("{name}: {e}"))?;
            check_indices(total, part.seen.iter().copied()).map_err(|e| format!("{name}: {e}"))?;
            let mut ds = Dataset::empty(model.num_features);
            let mut ordered = part.rows;
            ordered.sort_by_key(|r| r.0);
            for (j, line) in &ordered {
                let (label, x) = Dataset::parse_row(line).map_err(|_| format!("{name}: row {j} is malformed"))?;
                ds.push_row(label, &x).map_err(|_| format!("{name}: row {j} has the wrong width"))?;
            }
            let scores = predict(model, &ds, output).map_err(|e| e.to_string())?;
            let text: String = scores.iter().map(|s| format!("{s}\n")).collect();
            results.push((name, text.into_bytes()));
        }
        if results.is_empty() {
            return Err("predict names no data".into());
        }
        Ok(results)
    }

    fn get_model(&self) -> HandlerResult {
        let (model, _) = self.model.as_ref().ok_or("no model")?;
        let bytes = model.to_bytes();
        Ok(self.clients().into_iter().map(|n| (n, bytes.clone())).collect())
    }
}

/// Training parameters from a command's parameter map; `data.*` keys name
/// datasets and are skipped.
pub fn train_params(params: &BTreeMap<String, String>) -> sxgb_core::Result<TrainParams> {
    let mut p = TrainParams::default();
    for (k, v) in params {
        if !k.starts_with("data.") {
            p.set(k, v)?;
        }
    }
    p.validate()?;
    Ok(p)
}

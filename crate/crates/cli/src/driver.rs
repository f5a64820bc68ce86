//! Runs a client script: the attest, load, train, predict workflow issued
//! as signed commands by every client in turn.
//!
//! ```text
//! clients alice bob carol           # in-process mode only
//! upload alice alice.csv alice.enc  # encrypt a CSV under alice's key
//! attest
//! load_dmatrix data.alice=alice.enc data.bob=bob.enc data.carol=carol.enc
//! train objective=binary:logistic gamma=0.1 max_depth=3 num_rounds=5
//! predict data.alice=alice_test.enc
//! @alice,bob get_model              # only alice and bob submit
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};
use sxgb_cluster::attest::measure;
use sxgb_cluster::net::RemoteOrchestrator;
use sxgb_cluster::{ClientSession, ClusterConfig, Endpoint, InProcess, MemoryStorage, Reply, Simulation, Storage};
use sxgb_protocol::rows::{encode_records, encrypt_dataset};
use sxgb_protocol::{ClientIdentity, Deployment, Rng};

use crate::csvio::read_csv;
use crate::error::{CliError, Result};
use crate::keys;

pub enum Link {
    Local(Box<InProcess<MemoryStorage>>),
    Remote { conns: Vec<RemoteOrchestrator>, storage: PathBuf },
}

pub struct Driver {
    pub sessions: Vec<ClientSession>,
    pub link: Link,
    pub base: PathBuf,
    pub out: Option<PathBuf>,
    pub timeout: Duration,
    /// Bytes of the last model returned by `train` or `get_model`.
    pub model: Option<Vec<u8>>,
    /// Decrypted predictions per client from the last `predict`.
    pub predictions: BTreeMap<String, Vec<f64>>,
    pub lines: Vec<String>,
}

#[derive(Debug, PartialEq)]
enum Step {
    Clients(Vec<String>),
    Upload { client: String, csv: PathBuf, blob: String },
    Attest,
    Call { who: Option<Vec<String>>, func: String, params: BTreeMap<String, String> },
}

fn parse_script(text: &str) -> Result<Vec<Step>> {
    let mut steps = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: &str| CliError::Usage(format!("script line {}: {m}", n + 1));
        let mut words: Vec<&str> = line.split_whitespace().collect();
        let who = match words[0].strip_prefix('@') {
            Some(list) => {
                words.remove(0);
                Some(list.split(',').map(String::from).collect())
            }
            None => None,
        };
        let (&head, rest) = words.split_first().ok_or_else(|| bad("missing command"))?;
        steps.push(match head {
            "clients" => Step::Clients(rest.iter().flat_map(|w| w.split(',')).filter(|s| !s.is_empty()).map(String::from).collect()),
            "upload" => match rest {
                [client, csv, blob] => Step::Upload { client: client.to_string(), csv: csv.into(), blob: blob.to_string() },
                _ => return Err(bad("usage: upload <client> <csv> <blob>")),
            },
            "attest" => Step::Attest,
            "load_dmatrix" | "train" | "predict" | "get_model" => {
                let params = rest
                    .iter()
                    .map(|kv| kv.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())).ok_or_else(|| bad("expected key=value")))
                    .collect::<Result<_>>()?;
                Step::Call { who, func: head.to_string(), params }
            }
            other => return Err(bad(&format!("unknown command {other:?}"))),
        });
    }
    Ok(steps)
}

impl Driver {
    /// `clients` and a `nodes`-enclave cluster inside this process.
    pub fn in_process(names: &[String], nodes: usize, rng: &mut impl Rng) -> Result<Self> {
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let sim = Simulation::new(&refs, nodes, rng)?;
        Ok(Self::with_link(sim.sessions, Link::Local(Box::new(sim.service))))
    }

    /// One orchestrator connection per client in `names`, using the
    /// identities in `keys_dir`. An empty `names` means every deployment client.
    pub fn remote(config: &ClusterConfig, keys_dir: &Path, names: &[String]) -> Result<Self> {
        let names: Vec<String> = if names.is_empty() {
            Deployment::from_text(&std::fs::read_to_string(&config.deployment)?)?.clients.into_iter().collect()
        } else {
            names.to_vec()
        };
        let platform = keys::load_platform_public(&keys_dir.join(keys::PLATFORM_PUB))?;
        let manifest = match &config.manifest {
            Some(p) => std::fs::read(p)?,
            None => sxgb_cluster::default_manifest(),
        };
        let mut sessions = Vec::new();
        let mut conns = Vec::new();
        for name in &names {
            sessions.push(ClientSession::new(ClientIdentity::load(keys_dir, name)?, platform.clone(), measure(&manifest)));
            conns.push(RemoteOrchestrator::connect(config.orchestrator.as_str())?);
        }
        Ok(Self::with_link(sessions, Link::Remote { conns, storage: config.storage.clone() }))
    }

    fn with_link(sessions: Vec<ClientSession>, link: Link) -> Self {
        Driver {
            sessions,
            link,
            base: PathBuf::from("."),
            out: None,
            timeout: Duration::from_secs(30),
            model: None,
            predictions: BTreeMap::new(),
            lines: Vec::new(),
        }
    }

    fn say(&mut self, line: String) {
        println!("{line}");
        self.lines.push(line);
    }

    fn endpoint(&mut self, i: usize) -> &mut dyn Endpoint {
        match &mut self.link {
            Link::Local(p) => p.as_mut(),
            Link::Remote { conns, .. } => &mut conns[i],
        }
    }

    fn index_of(&self, name: &str) -> Result<usize> {
        self.sessions.iter().position(|s| s.name() == name).ok_or_else(|| CliError::Usage(format!("unknown client {name:?}")))
    }

    pub fn attest(&mut self) -> Result<()> {
        for i in 0..self.sessions.len() {
            let report = self.endpoint(i).attest()?;
            self.sessions[i].attest(&report)?;
            let msg = self.sessions[i].enrollment()?;
            self.endpoint(i).enroll(&msg)?;
            let line = format!("attest: {} verified measurement {} and enrolled", self.sessions[i].name(), hex::encode(&report.measurement[..8]));
            self.say(line);
        }
        Ok(())
    }

    pub fn upload(&mut self, client: &str, csv: &Path, blob: &str) -> Result<()> {
        let i = self.index_of(client)?;
        let rows = read_csv(&self.base.join(csv))?;
        let records = encrypt_dataset(&rows, &self.sessions[i].identity.sym_key, &mut rand::thread_rng());
        let bytes = encode_records(&records);
        match &mut self.link {
            Link::Local(p) => p.master.storage_mut().put(blob, bytes)?,
            Link::Remote { storage, .. } => std::fs::write(storage.join(blob), bytes)?,
        }
        self.say(format!("upload: {client} {} rows -> {blob}", rows.len()));
        Ok(())
    }

    /// Submits `func(params)` from `who` (default: every client) and waits
    /// for the signed response.
    pub fn call(&mut self, who: Option<&[String]>, func: &str, params: &BTreeMap<String, String>) -> Result<()> {
        let who: Vec<usize> = match who {
            Some(names) => names.iter().map(|n| self.index_of(n)).collect::<Result<_>>()?,
            None => (0..self.sessions.len()).collect(),
        };
        if func == "train" {
            sxgb_cluster::master::train_params(params)?;
        }
        let first = *who.first().ok_or_else(|| CliError::Usage("no submitting clients".into()))?;
        let seqn = self.sessions[first].next_seqn()?;
        for &i in &who {
            let cmd = self.sessions[i].command(func, params.clone())?;
            self.endpoint(i).submit(cmd)?;
        }
        let start = Instant::now();
        let reply = loop {
            if let Some(r) = self.endpoint(first).fetch(&seqn)? {
                break r;
            }
            if start.elapsed() >= self.timeout || matches!(self.link, Link::Local(_)) {
                let waiting: Vec<&str> =
                    (0..self.sessions.len()).filter(|i| !who.contains(i)).map(|i| self.sessions[i].name()).collect();
                return Err(CliError::Protocol(format!("timeout: {func} not executed, waiting for {}", waiting.join(","))));
            }
            std::thread::sleep(Duration::from_millis(20));
        };
        let response = match reply {
            Reply::Response(r) => r,
            Reply::Rejected(m) => return Err(CliError::Protocol(format!("{func} rejected: {m}"))),
        };
        for &i in &who {
            let name = self.sessions[i].name().to_string();
            match self.sessions[i].open(&seqn, &response)? {
                Err(m) if m.starts_with("no result for") => {}
                Err(m) => return Err(CliError::Protocol(format!("{func}: {m}"))),
                Ok(bytes) => self.handle(func, &name, bytes)?,
            }
        }
        Ok(())
    }

    fn handle(&mut self, func: &str, name: &str, bytes: Vec<u8>) -> Result<()> {
        match func {
            "train" | "get_model" => {
                let digest = hex::encode(&Sha256::digest(&bytes)[..8]);
                self.say(format!("{func}: {name} model {} bytes sha256 {digest}", bytes.len()));
                if let Some(out) = &self.out {
                    std::fs::write(out.join("model.bin"), &bytes)?;
                }
                self.model = Some(bytes);
            }
            "predict" => {
                let text = String::from_utf8_lossy(&bytes).into_owned();
                let preds: Vec<f64> = text.lines().filter_map(|l| l.parse().ok()).collect();
                self.say(format!("predict: {name} {} predictions", preds.len()));
                if let Some(out) = &self.out {
                    std::fs::write(out.join(format!("{name}.predictions")), &text)?;
                }
                self.predictions.insert(name.to_string(), preds);
            }
            _ => self.say(format!("{func}: {name} {}", String::from_utf8_lossy(&bytes))),
        }
        Ok(())
    }

    pub fn run_script(&mut self, text: &str) -> Result<()> {
        for step in parse_script(text)? {
            match step {
                Step::Clients(names) => {
                    let have: Vec<&str> = self.sessions.iter().map(ClientSession::name).collect();
                    if names.iter().map(String::as_str).collect::<Vec<_>>() != have {
                        return Err(CliError::Usage(format!("script clients {names:?} do not match {have:?}")));
                    }
                }
                Step::Upload { client, csv, blob } => self.upload(&client, &csv, &blob)?,
                Step::Attest => self.attest()?,
                Step::Call { who, func, params } => self.call(who.as_deref(), &func, &params)?,
            }
        }
        Ok(())
    }
}

/// Client names declared by a script's `clients` line, empty if none.
pub fn script_clients(text: &str) -> Result<Vec<String>> {
    Ok(parse_script(text)?
        .into_iter()
        .find_map(|s| match s {
            Step::Clients(c) => Some(c),
            _ => None,
        })
        .unwrap_or_default())
}

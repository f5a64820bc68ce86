//! `key = value` cluster configuration.
//!
//! ```text
//! # one address per enclave node; node 0 is the master
//! nodes = 127.0.0.1:7101,127.0.0.1:7102,127.0.0.1:7103
//! topology = -,0,0
//! manifest = build.manifest
//! deployment = deployment.txt
//! platform_key = platform.pem
//! storage = ./blobs
//! orchestrator = 127.0.0.1:7100
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{ClusterError, Result};
use crate::topology::Topology;

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterConfig {
    pub nodes: Vec<String>,
    pub topology: Topology,
    /// `None` selects the built-in manifest.
    pub manifest: Option<PathBuf>,
    pub deployment: PathBuf,
    pub platform_key: PathBuf,
    pub storage: PathBuf,
    pub orchestrator: String,
}

impl ClusterConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ClusterError::Config(format!("line {}: expected key = value", n + 1)))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        fn take(kv: &mut BTreeMap<String, String>, k: &str) -> Result<String> {
            kv.remove(k).ok_or_else(|| ClusterError::Config(format!("missing {k}")))
        }
        let nodes: Vec<String> = take(&mut kv, "nodes")?.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        let topology = match kv.remove("topology") {
            Some(t) => Topology::parse(&t)?,
            None => Topology::binary(nodes.len()),
        };
        if topology.len() != nodes.len() {
            return Err(ClusterError::Config(format!("{} nodes but topology has {}", nodes.len(), topology.len())));
        }
        let path = |p: String| base.join(p);
        let cfg = ClusterConfig {
            nodes,
            topology,
            manifest: kv.remove("manifest").map(path),
            deployment: path(take(&mut kv, "deployment")?),
            platform_key: path(take(&mut kv, "platform_key")?),
            storage: path(take(&mut kv, "storage")?),
            orchestrator: take(&mut kv, "orchestrator")?,
        };
        if let Some(k) = kv.keys().next() {
            return Err(ClusterError::Config(format!("unknown key {k}")));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, path.parent().unwrap_or(Path::new(".")))
    }
}

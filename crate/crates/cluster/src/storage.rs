//! Untrusted blob storage holding encrypted client files.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{ClusterError, Result};

pub trait Storage: Send {
    fn get(&self, name: &str) -> Result<Vec<u8>>;
    fn put(&mut self, name: &str, bytes: Vec<u8>) -> Result<()>;
}

#[derive(Clone, Debug, Default)]
pub struct MemoryStorage {
    blobs: BTreeMap<String, Vec<u8>>,
}

impl Storage for MemoryStorage {
    fn get(&self, name: &str) -> Result<Vec<u8>> {
        self.blobs.get(name).cloned().ok_or_else(|| ClusterError::Storage(format!("no blob {name:?}")))
    }

    fn put(&mut self, name: &str, bytes: Vec<u8>) -> Result<()> {
        self.blobs.insert(name.to_string(), bytes);
        Ok(())
    }
}

/// Blobs are files directly under `root`.
#[derive(Clone, Debug)]
pub struct DirStorage {
    pub root: PathBuf,
}

impl DirStorage {
    fn path(&self, name: &str) -> Result<PathBuf> {
        if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(ClusterError::Storage(format!("invalid blob name {name:?}")));
        }
        Ok(self.root.join(name))
    }
}

impl Storage for DirStorage {
    fn get(&self, name: &str) -> Result<Vec<u8>> {
        Ok(std::fs::read(self.path(name)?)?)
    }

    fn put(&mut self, name: &str, bytes: Vec<u8>) -> Result<()> {
        Ok(std::fs::write(self.path(name)?, bytes)?)
    }
}

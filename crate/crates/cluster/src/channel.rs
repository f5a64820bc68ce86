//! Sealed parent/child channels and a tap that sees every byte sent.

use std::sync::Mutex;

use sxgb_protocol::SymKey;

use crate::error::{ClusterError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub from: usize,
    pub to: usize,
    pub bytes: Vec<u8>,
}

/// Records every frame that crosses a channel, for leak scans in tests.
#[derive(Debug, Default)]
pub struct Wire {
    frames: Mutex<Vec<Frame>>,
}

impl Wire {
    pub fn record(&self, from: usize, to: usize, bytes: &[u8]) {
        self.frames.lock().unwrap().push(Frame { from, to, bytes: bytes.to_vec() });
    }

    pub fn frames(&self) -> Vec<Frame> {
        self.frames.lock().unwrap().clone()
    }

    pub fn len(&self) -> usize {
        self.frames.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, needle: &[u8]) -> bool {
        !needle.is_empty() && self.frames.lock().unwrap().iter().any(|f| f.bytes.windows(needle.len()).any(|w| w == needle))
    }
}

fn ad(from: usize, to: usize) -> [u8; 8] {
    let mut a = [0u8; 8];
    a[..4].copy_from_slice(&(from as u32).to_le_bytes());
    a[4..].copy_from_slice(&(to as u32).to_le_bytes());
    a
}

/// `nonce | ciphertext | tag`, with the direction bound as associated data.
pub fn seal(key: &SymKey, from: usize, to: usize, plaintext: &[u8]) -> Vec<u8> {
    let mut nonce = [0u8; 12];
    rand::RngCore::fill_bytes(&mut rand::thread_rng(), &mut nonce);
    let (ct, tag) = key.seal(&nonce, &ad(from, to), plaintext);
    let mut out = Vec::with_capacity(12 + ct.len() + 16);
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&ct);
    out.extend_from_slice(&tag);
    out
}

pub fn open(key: &SymKey, from: usize, to: usize, envelope: &[u8]) -> Result<Vec<u8>> {
    let fail = |reason: &str| ClusterError::Channel { from, to, reason: reason.into() };
    if envelope.len() < 28 {
        return Err(fail("short envelope"));
    }
    let (nonce, rest) = envelope.split_at(12);
    let (ct, tag) = rest.split_at(rest.len() - 16);
    key.open(nonce.try_into().unwrap(), &ad(from, to), ct, tag.try_into().unwrap())
        .ok_or_else(|| fail("authentication failed"))
}

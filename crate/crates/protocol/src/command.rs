//! Signed API commands and the all-clients admission check.

use std::collections::{BTreeMap, BTreeSet};

use rsa::RsaPublicKey;
use serde_json::{json, Value};

use crate::error::{ProtocolError, Result};
use crate::keys::{ClientIdentity, NONCE_BYTES};
use crate::wire::{b64, bytes_field, canonical, field, parse, sign, str_field, verify};
use crate::Rng;

/// Deployment nonce followed by a per-deployment counter starting at 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Seqn {
    pub nonce: [u8; NONCE_BYTES],
    pub ctr: u64,
}

impl Seqn {
    pub fn to_bytes(&self) -> [u8; NONCE_BYTES + 8] {
        let mut out = [0u8; NONCE_BYTES + 8];
        out[..NONCE_BYTES].copy_from_slice(&self.nonce);
        out[NONCE_BYTES..].copy_from_slice(&self.ctr.to_le_bytes());
        out
    }

    pub fn to_json(self) -> Value {
        json!({ "ctr": self.ctr, "nonce": hex::encode(self.nonce) })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let nonce = hex::decode(str_field(v, "nonce")?)
            .ok()
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| ProtocolError::Format("bad seqn nonce".into()))?;
        let ctr = field(v, "ctr")?.as_u64().ok_or_else(|| ProtocolError::Format("bad seqn counter".into()))?;
        Ok(Seqn { nonce, ctr })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Command {
    pub seqn: Seqn,
    pub func: String,
    pub params: BTreeMap<String, String>,
}

impl Command {
    pub fn new(seqn: Seqn, func: &str, params: BTreeMap<String, String>) -> Self {
        Command { seqn, func: func.to_string(), params }
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        canonical(&json!({ "func": self.func, "params": self.params, "seqn": self.seqn.to_json() }))
    }

    pub fn from_canonical(bytes: &[u8]) -> Result<Self> {
        let v = parse(bytes)?;
        let params = match field(&v, "params")? {
            Value::Object(m) => m
                .iter()
                .map(|(k, v)| v.as_str().map(|s| (k.clone(), s.to_string())))
                .collect::<Option<_>>()
                .ok_or_else(|| ProtocolError::Format("command params must be strings".into()))?,
            _ => return Err(ProtocolError::Format("command params must be an object".into())),
        };
        let cmd = Command { seqn: Seqn::from_json(field(&v, "seqn")?)?, func: str_field(&v, "func")?.to_string(), params };
        if cmd.canonical_bytes() != bytes {
            return Err(ProtocolError::Format("command bytes are not canonical".into()));
        }
        Ok(cmd)
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(String::as_str)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedCommand {
    pub signer: String,
    pub payload: Vec<u8>,
    pub signature: Vec<u8>,
}

impl SignedCommand {
    pub fn to_json(&self) -> Value {
        json!({ "payload": b64(&self.payload), "signature": b64(&self.signature), "signer": self.signer })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        Ok(SignedCommand {
            signer: str_field(v, "signer")?.to_string(),
            payload: bytes_field(v, "payload")?,
            signature: bytes_field(v, "signature")?,
        })
    }
}

pub fn make_signed_command(
    client: &ClientIdentity,
    nonce: [u8; NONCE_BYTES],
    ctr: u64,
    func: &str,
    params: BTreeMap<String, String>,
    rng: &mut impl Rng,
) -> SignedCommand {
    let payload = Command::new(Seqn { nonce, ctr }, func, params).canonical_bytes();
    let signature = sign(&client.sign_key, &payload, rng);
    SignedCommand { signer: client.name.clone(), payload, signature }
}

/// Admission state held by the master enclave: who must sign and which
/// counter comes next. One command set is admitted at a time.
#[derive(Clone, Debug)]
pub struct CommandGate {
    nonce: [u8; NONCE_BYTES],
    next_ctr: u64,
    clients: BTreeMap<String, RsaPublicKey>,
}

impl CommandGate {
    pub fn new(nonce: [u8; NONCE_BYTES]) -> Self {
        CommandGate { nonce, next_ctr: 1, clients: BTreeMap::new() }
    }

    pub fn register(&mut self, name: &str, key: RsaPublicKey) {
        self.clients.insert(name.to_string(), key);
    }

    pub fn clients(&self) -> impl Iterator<Item = &str> {
        self.clients.keys().map(String::as_str)
    }

    pub fn next_ctr(&self) -> u64 {
        self.next_ctr
    }

    pub fn nonce(&self) -> [u8; NONCE_BYTES] {
        self.nonce
    }

    /// Checks that every registered client signed the same canonical payload
    /// carrying this deployment's nonce and the next counter value.
    pub fn verify_command_set(&self, commands: &[SignedCommand]) -> Result<Command> {
        let mut seen = BTreeSet::new();
        for c in commands {
            if !self.clients.contains_key(&c.signer) {
                return Err(ProtocolError::UnknownClient(c.signer.clone()));
            }
            if !seen.insert(c.signer.as_str()) {
                return Err(ProtocolError::DuplicateSigner(c.signer.clone()));
            }
        }
        if let Some(missing) = self.clients.keys().find(|n| !seen.contains(n.as_str())) {
            return Err(ProtocolError::MissingClient(missing.clone()));
        }
        for c in commands {
            if !verify(&self.clients[&c.signer], &c.payload, &c.signature) {
                return Err(ProtocolError::SignatureMismatch(c.signer.clone()));
            }
        }
        let first = commands.first().ok_or_else(|| ProtocolError::MissingClient(String::new()))?;
        if let Some(d) = commands.iter().find(|c| c.payload != first.payload) {
            return Err(ProtocolError::PayloadDivergence(d.signer.clone()));
        }
        let cmd = Command::from_canonical(&first.payload)?;
        if cmd.seqn.nonce != self.nonce {
            return Err(ProtocolError::WrongNonce);
        }
        let expected = self.next_ctr;
        match cmd.seqn.ctr {
            c if c < expected => Err(ProtocolError::StaleSequence { expected, got: c }),
            c if c > expected => Err(ProtocolError::OutOfOrderSequence { expected, got: c }),
            _ => Ok(cmd),
        }
    }

    /// [`verify_command_set`](Self::verify_command_set), then consumes the
    /// counter value so the same set can never be admitted again.
    pub fn admit(&mut self, commands: &[SignedCommand]) -> Result<Command> {
        let cmd = self.verify_command_set(commands)?;
        self.next_ctr += 1;
        Ok(cmd)
    }
}

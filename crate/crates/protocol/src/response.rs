//! Enclave responses: signed, bound to the command's sequence number, with
//! any client data sealed separately under each recipient's key.

use rsa::{RsaPrivateKey, RsaPublicKey};
use serde_json::{json, Value};

use crate::command::Seqn;
use crate::error::{ProtocolError, Result};
use crate::keys::SymKey;
use crate::wire::{b64, bytes_field, canonical, field, parse, sign, str_field, verify};
use crate::Rng;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Error(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SealedBlob {
    pub recipient: String,
    pub nonce: [u8; 12],
    pub ciphertext: Vec<u8>,
    pub tag: [u8; 16],
}

fn blob_ad(seqn: &Seqn, recipient: &str) -> Vec<u8> {
    let mut ad = seqn.to_bytes().to_vec();
    ad.extend_from_slice(recipient.as_bytes());
    ad
}

impl SealedBlob {
    pub fn seal(seqn: &Seqn, recipient: &str, key: &SymKey, plaintext: &[u8], rng: &mut impl Rng) -> Self {
        let mut nonce = [0u8; 12];
        rng.fill_bytes(&mut nonce);
        let (ciphertext, tag) = key.seal(&nonce, &blob_ad(seqn, recipient), plaintext);
        SealedBlob { recipient: recipient.to_string(), nonce, ciphertext, tag }
    }

    pub fn open(&self, seqn: &Seqn, key: &SymKey) -> Result<Vec<u8>> {
        key.open(&self.nonce, &blob_ad(seqn, &self.recipient), &self.ciphertext, &self.tag)
            .ok_or_else(|| ProtocolError::Crypto(format!("sealed result for {:?} failed to open", self.recipient)))
    }

    fn to_json(&self) -> Value {
        json!({
            "ciphertext": b64(&self.ciphertext),
            "nonce": b64(&self.nonce),
            "recipient": self.recipient,
            "tag": b64(&self.tag),
        })
    }

    fn from_json(v: &Value) -> Result<Self> {
        let fixed = |k: &str| bytes_field(v, k);
        Ok(SealedBlob {
            recipient: str_field(v, "recipient")?.to_string(),
            nonce: fixed("nonce")?.try_into().map_err(|_| ProtocolError::Format("nonce length".into()))?,
            ciphertext: fixed("ciphertext")?,
            tag: fixed("tag")?.try_into().map_err(|_| ProtocolError::Format("tag length".into()))?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResponseBody {
    pub seqn: Seqn,
    pub outcome: Outcome,
    pub sealed: Vec<SealedBlob>,
}

impl ResponseBody {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let (status, message) = match &self.outcome {
            Outcome::Ok => ("ok", ""),
            Outcome::Error(m) => ("error", m.as_str()),
        };
        let sealed: Vec<Value> = self.sealed.iter().map(SealedBlob::to_json).collect();
        canonical(&json!({ "message": message, "sealed": sealed, "seqn": self.seqn.to_json(), "status": status }))
    }

    pub fn from_canonical(bytes: &[u8]) -> Result<Self> {
        let v = parse(bytes)?;
        let outcome = match str_field(&v, "status")? {
            "ok" => Outcome::Ok,
            "error" => Outcome::Error(str_field(&v, "message")?.to_string()),
            s => return Err(ProtocolError::Format(format!("unknown status {s:?}"))),
        };
        let sealed = field(&v, "sealed")?
            .as_array()
            .ok_or_else(|| ProtocolError::Format("sealed must be a list".into()))?
            .iter()
            .map(SealedBlob::from_json)
            .collect::<Result<_>>()?;
        Ok(ResponseBody { seqn: Seqn::from_json(field(&v, "seqn")?)?, outcome, sealed })
    }

    /// Opens the blob addressed to `name`.
    pub fn open_for(&self, name: &str, key: &SymKey) -> Result<Vec<u8>> {
        self.sealed
            .iter()
            .find(|b| b.recipient == name)
            .ok_or_else(|| ProtocolError::UnknownClient(name.to_string()))?
            .open(&self.seqn, key)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedResponse {
    pub payload: Vec<u8>,
    pub signature: Vec<u8>,
}

impl SignedResponse {
    pub fn verify(&self, enclave: &RsaPublicKey) -> Result<ResponseBody> {
        if !verify(enclave, &self.payload, &self.signature) {
            return Err(ProtocolError::BadSignature("response not signed by the enclave".into()));
        }
        ResponseBody::from_canonical(&self.payload)
    }

    pub fn to_json(&self) -> Value {
        json!({ "payload": b64(&self.payload), "signature": b64(&self.signature) })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        Ok(SignedResponse { payload: bytes_field(v, "payload")?, signature: bytes_field(v, "signature")? })
    }
}

pub fn sign_response(enclave: &RsaPrivateKey, body: &ResponseBody, rng: &mut impl Rng) -> SignedResponse {
    let payload = body.canonical_bytes();
    let signature = sign(enclave, &payload, rng);
    SignedResponse { payload, signature }
}

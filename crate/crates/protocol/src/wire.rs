//! Canonical JSON, base64 fields and the RSA operations shared by all envelopes.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use rsa::{Oaep, Pss, RsaPrivateKey, RsaPublicKey};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{ProtocolError, Result};
use crate::Rng;

/// Sorted keys, no whitespace. `serde_json` maps are ordered by key unless
/// `preserve_order` is enabled, which this workspace never does.
pub fn canonical(v: &Value) -> Vec<u8> {
    serde_json::to_vec(v).expect("json values always serialize")
}

pub fn parse(bytes: &[u8]) -> Result<Value> {
    serde_json::from_slice(bytes).map_err(|e| ProtocolError::Format(e.to_string()))
}

pub fn b64(bytes: &[u8]) -> String {
    STANDARD.encode(bytes)
}

pub fn unb64(s: &str) -> Result<Vec<u8>> {
    STANDARD.decode(s).map_err(|e| ProtocolError::Format(e.to_string()))
}

pub fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| ProtocolError::Format(format!("missing field {key:?}")))
}

pub fn str_field<'a>(v: &'a Value, key: &str) -> Result<&'a str> {
    field(v, key)?.as_str().ok_or_else(|| ProtocolError::Format(format!("field {key:?} is not a string")))
}

pub fn bytes_field(v: &Value, key: &str) -> Result<Vec<u8>> {
    unb64(str_field(v, key)?)
}

pub fn sign(key: &RsaPrivateKey, msg: &[u8], rng: &mut impl Rng) -> Vec<u8> {
    let digest = Sha256::digest(msg);
    key.sign_with_rng(rng, Pss::new::<Sha256>(), &digest).expect("2048-bit key signs a sha256 digest")
}

pub fn verify(key: &RsaPublicKey, msg: &[u8], sig: &[u8]) -> bool {
    key.verify(Pss::new::<Sha256>(), &Sha256::digest(msg), sig).is_ok()
}

pub fn wrap(key: &RsaPublicKey, msg: &[u8], rng: &mut impl Rng) -> Result<Vec<u8>> {
    key.encrypt(rng, Oaep::new::<Sha256>(), msg).map_err(|e| ProtocolError::Crypto(e.to_string()))
}

pub fn unwrap(key: &RsaPrivateKey, ct: &[u8]) -> Result<Vec<u8>> {
    key.decrypt(Oaep::new::<Sha256>(), ct).map_err(|e| ProtocolError::Crypto(e.to_string()))
}

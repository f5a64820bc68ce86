//! Mock remote attestation. The measurement is the SHA-256 of the build
//! manifest and reports are signed by a simulated platform key.

use rsa::{RsaPrivateKey, RsaPublicKey};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use sxgb_protocol::keys::{generate_rsa, public_key_der, public_key_from_der, NONCE_BYTES};
use sxgb_protocol::wire::{b64, canonical, sign, str_field, unb64, verify};
use sxgb_protocol::{EnclaveIdentity, ProtocolError, Rng};

use crate::error::{ClusterError, Result};

/// Manifest used when none is configured: crate version and the parameter
/// schema the enclave accepts.
pub fn default_manifest() -> Vec<u8> {
    format!(
        "sxgb-enclave {}\nparams: objective gamma max_depth num_rounds num_bins lambda eta\napi: load_dmatrix train predict get_model\n",
        env!("CARGO_PKG_VERSION")
    )
    .into_bytes()
}

pub fn measure(manifest: &[u8]) -> [u8; 32] {
    Sha256::digest(manifest).into()
}

pub struct PlatformKey {
    key: RsaPrivateKey,
}

impl PlatformKey {
    pub fn generate(rng: &mut impl Rng) -> Self {
        PlatformKey { key: generate_rsa(rng) }
    }

    pub fn from_key(key: RsaPrivateKey) -> Self {
        PlatformKey { key }
    }

    pub fn key(&self) -> &RsaPrivateKey {
        &self.key
    }

    pub fn public_key(&self) -> RsaPublicKey {
        self.key.to_public_key()
    }

    pub fn report(&self, enclave: &EnclaveIdentity, rng: &mut impl Rng) -> AttestationReport {
        let public_key = enclave.public_key();
        let body = AttestationReport::signed_bytes(&enclave.measurement, &public_key, &enclave.nonce);
        AttestationReport { measurement: enclave.measurement, public_key, nonce: enclave.nonce, signature: sign(&self.key, &body, rng) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttestationReport {
    pub measurement: [u8; 32],
    pub public_key: RsaPublicKey,
    pub nonce: [u8; NONCE_BYTES],
    pub signature: Vec<u8>,
}

impl AttestationReport {
    fn signed_bytes(measurement: &[u8; 32], pk: &RsaPublicKey, nonce: &[u8; NONCE_BYTES]) -> Vec<u8> {
        canonical(&json!({
            "measurement": hex::encode(measurement),
            "nonce": hex::encode(nonce),
            "public_key": b64(&public_key_der(pk)),
        }))
    }

    /// Signature first, then the measurement; `node` labels the error.
    pub fn verify(&self, platform: &RsaPublicKey, expected: &[u8; 32], node: usize) -> Result<()> {
        if !verify(platform, &Self::signed_bytes(&self.measurement, &self.public_key, &self.nonce), &self.signature) {
            return Err(ClusterError::AttestationSignatureInvalid);
        }
        if &self.measurement != expected {
            return Err(ClusterError::MeasurementMismatch { node });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "measurement": hex::encode(self.measurement),
            "nonce": hex::encode(self.nonce),
            "public_key": b64(&public_key_der(&self.public_key)),
            "signature": b64(&self.signature),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        fn fixed<const N: usize>(v: &Value, k: &str) -> Result<[u8; N]> {
            hex::decode(str_field(v, k)?)
                .ok()
                .and_then(|b| b.try_into().ok())
                .ok_or_else(|| ProtocolError::Format(format!("bad {k}")).into())
        }
        Ok(AttestationReport {
            measurement: fixed(v, "measurement")?,
            nonce: fixed(v, "nonce")?,
            public_key: public_key_from_der(&unb64(str_field(v, "public_key")?)?)?,
            signature: unb64(str_field(v, "signature")?)?,
        })
    }
}

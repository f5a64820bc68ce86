//! Client key enrollment with the master enclave.
//!
//! The client wraps its symmetric key under the enclave's RSA key (OAEP),
//! signs the wrapped key together with the deployment nonce, and attaches its
//! certificate. The enclave accepts only names from the deployment's client
//! list whose certificate chains to the deployment CA.

use std::collections::BTreeSet;

use rsa::RsaPublicKey;
use serde_json::{json, Value};

use crate::error::{ProtocolError, Result};
use crate::keys::{public_key_from_pem, public_key_to_pem, Certificate, ClientIdentity, EnclaveIdentity, SymKey, NONCE_BYTES};
use crate::wire::{b64, bytes_field, canonical, sign, str_field, unwrap, verify, wrap};
use crate::Rng;

/// Client list and CA key every enclave is launched with.
#[derive(Clone, Debug, PartialEq)]
pub struct Deployment {
    pub clients: BTreeSet<String>,
    pub ca: RsaPublicKey,
}

impl Deployment {
    /// `clients=a,b,c` plus the CA public key PEM.
    pub fn to_text(&self) -> String {
        let names: Vec<&str> = self.clients.iter().map(String::as_str).collect();
        format!("clients={}\n{}", names.join(","), public_key_to_pem(&self.ca))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
        let names = first
            .strip_prefix("clients=")
            .ok_or_else(|| ProtocolError::Format("deployment must start with clients=".into()))?;
        let clients: BTreeSet<String> = names.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
        if clients.is_empty() {
            return Err(ProtocolError::Format("deployment lists no clients".into()));
        }
        Ok(Deployment { clients, ca: public_key_from_pem(rest)? })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnrollmentMessage {
    pub name: String,
    pub certificate: Certificate,
    pub wrapped_key: Vec<u8>,
    pub signature: Vec<u8>,
}

fn signed_bytes(name: &str, nonce: &[u8; NONCE_BYTES], wrapped: &[u8]) -> Vec<u8> {
    canonical(&json!({ "name": name, "nonce": hex::encode(nonce), "wrapped_key": b64(wrapped) }))
}

impl EnrollmentMessage {
    pub fn to_json(&self) -> Value {
        json!({
            "certificate": self.certificate.to_pem(),
            "name": self.name,
            "signature": b64(&self.signature),
            "wrapped_key": b64(&self.wrapped_key),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        Ok(EnrollmentMessage {
            name: str_field(v, "name")?.to_string(),
            certificate: Certificate::from_pem(str_field(v, "certificate")?)?,
            wrapped_key: bytes_field(v, "wrapped_key")?,
            signature: bytes_field(v, "signature")?,
        })
    }
}

pub fn enroll_client(
    client: &ClientIdentity,
    enclave_pk: &RsaPublicKey,
    nonce: &[u8; NONCE_BYTES],
    rng: &mut impl Rng,
) -> Result<EnrollmentMessage> {
    let wrapped_key = wrap(enclave_pk, client.sym_key.as_bytes(), rng)?;
    let signature = sign(&client.sign_key, &signed_bytes(&client.name, nonce, &wrapped_key), rng);
    Ok(EnrollmentMessage { name: client.name.clone(), certificate: client.certificate.clone(), wrapped_key, signature })
}

/// A client accepted by [`verify_enrollment`].
#[derive(Clone, Debug)]
pub struct Enrollment {
    pub name: String,
    pub sym_key: SymKey,
    pub public_key: RsaPublicKey,
}

pub fn verify_enrollment(deployment: &Deployment, enclave: &EnclaveIdentity, msg: &EnrollmentMessage) -> Result<Enrollment> {
    if !deployment.clients.contains(&msg.name) {
        return Err(ProtocolError::UnknownClient(msg.name.clone()));
    }
    msg.certificate.verify(&deployment.ca)?;
    if msg.certificate.subject != msg.name {
        return Err(ProtocolError::BadCertificate(format!("certificate issued to {:?}", msg.certificate.subject)));
    }
    let pk = &msg.certificate.public_key;
    if !verify(pk, &signed_bytes(&msg.name, &enclave.nonce, &msg.wrapped_key), &msg.signature) {
        return Err(ProtocolError::BadSignature(format!("enrollment of {:?}", msg.name)));
    }
    let sym_key = SymKey::from_bytes(&unwrap(&enclave.key, &msg.wrapped_key)?)?;
    Ok(Enrollment { name: msg.name.clone(), sym_key, public_key: pk.clone() })
}

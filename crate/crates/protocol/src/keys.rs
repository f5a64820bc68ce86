//! Symmetric and RSA key material, and a minimal certificate authority.

use std::fmt;
use std::path::Path;

use aes_gcm::aead::AeadInPlace;
use aes_gcm::{Aes256Gcm, KeyInit, Nonce, Tag};
use rsa::pkcs8::{DecodePrivateKey, DecodePublicKey, EncodePrivateKey, EncodePublicKey, LineEnding};
use rsa::traits::PublicKeyParts;
pub use rsa::{RsaPrivateKey, RsaPublicKey};
use serde_json::json;

use crate::error::{ProtocolError, Result};
use crate::wire::{b64, canonical, parse, sign, str_field, unb64, verify};
use crate::Rng;

pub const SYM_KEY_BYTES: usize = 32;
pub const RSA_BITS: usize = 2048;
pub const NONCE_BYTES: usize = 16;
pub const CERT_PEM_TAG: &str = "SXGB CERTIFICATE";

/// A client's 256-bit data key.
#[derive(Clone, PartialEq, Eq)]
pub struct SymKey([u8; SYM_KEY_BYTES]);

impl SymKey {
    pub fn generate(rng: &mut impl Rng) -> Self {
        let mut k = [0u8; SYM_KEY_BYTES];
        rng.fill_bytes(&mut k);
        SymKey(k)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let k = bytes
            .try_into()
            .map_err(|_| ProtocolError::Format(format!("symmetric key must be {SYM_KEY_BYTES} bytes, got {}", bytes.len())))?;
        Ok(SymKey(k))
    }

    pub fn as_bytes(&self) -> &[u8; SYM_KEY_BYTES] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = hex::decode(s.trim()).map_err(|e| ProtocolError::Format(e.to_string()))?;
        Self::from_bytes(&bytes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_hex(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_hex() + "\n")?)
    }

    /// AES-256-GCM with a detached tag.
    pub fn seal(&self, nonce: &[u8; 12], aad: &[u8], plaintext: &[u8]) -> (Vec<u8>, [u8; 16]) {
        let mut buf = plaintext.to_vec();
        let tag = self
            .cipher()
            .encrypt_in_place_detached(Nonce::from_slice(nonce), aad, &mut buf)
            .expect("plaintext within AES-GCM length limit");
        (buf, tag.into())
    }

    /// `None` when the tag does not verify.
    pub fn open(&self, nonce: &[u8; 12], aad: &[u8], ciphertext: &[u8], tag: &[u8; 16]) -> Option<Vec<u8>> {
        let mut buf = ciphertext.to_vec();
        self.cipher()
            .decrypt_in_place_detached(Nonce::from_slice(nonce), aad, &mut buf, Tag::from_slice(tag))
            .ok()
            .map(|_| buf)
    }

    fn cipher(&self) -> Aes256Gcm {
        Aes256Gcm::new_from_slice(&self.0).expect("32-byte key")
    }
}

impl fmt::Debug for SymKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SymKey(..)")
    }
}

pub fn generate_rsa(rng: &mut impl Rng) -> RsaPrivateKey {
    RsaPrivateKey::new(rng, RSA_BITS).expect("rsa key generation")
}

pub fn private_key_to_pem(key: &RsaPrivateKey) -> String {
    key.to_pkcs8_pem(LineEnding::LF).expect("encodable key").to_string()
}

pub fn private_key_from_pem(pem: &str) -> Result<RsaPrivateKey> {
    RsaPrivateKey::from_pkcs8_pem(pem).map_err(|e| ProtocolError::Format(e.to_string()))
}

pub fn public_key_to_pem(key: &RsaPublicKey) -> String {
    key.to_public_key_pem(LineEnding::LF).expect("encodable key")
}

pub fn public_key_from_pem(pem: &str) -> Result<RsaPublicKey> {
    RsaPublicKey::from_public_key_pem(pem).map_err(|e| ProtocolError::Format(e.to_string()))
}

pub fn public_key_der(key: &RsaPublicKey) -> Vec<u8> {
    key.to_public_key_der().expect("encodable key").into_vec()
}

pub fn public_key_from_der(der: &[u8]) -> Result<RsaPublicKey> {
    RsaPublicKey::from_public_key_der(der).map_err(|e| ProtocolError::Format(e.to_string()))
}

/// Binding of a client name to an RSA public key, signed by the CA.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub subject: String,
    pub public_key: RsaPublicKey,
    pub signature: Vec<u8>,
}

impl Certificate {
    fn signed_bytes(subject: &str, key: &RsaPublicKey) -> Vec<u8> {
        canonical(&json!({ "public_key": b64(&public_key_der(key)), "subject": subject }))
    }

    pub fn verify(&self, ca: &RsaPublicKey) -> Result<()> {
        if verify(ca, &Self::signed_bytes(&self.subject, &self.public_key), &self.signature) {
            Ok(())
        } else {
            Err(ProtocolError::BadCertificate(format!("{:?} not signed by the trusted CA", self.subject)))
        }
    }

    pub fn to_pem(&self) -> String {
        let body = json!({
            "public_key": b64(&public_key_der(&self.public_key)),
            "signature": b64(&self.signature),
            "subject": self.subject,
        });
        pem::encode(&pem::Pem::new(CERT_PEM_TAG, canonical(&body)))
    }

    pub fn from_pem(text: &str) -> Result<Self> {
        let p = pem::parse(text).map_err(|e| ProtocolError::BadCertificate(e.to_string()))?;
        if p.tag() != CERT_PEM_TAG {
            return Err(ProtocolError::BadCertificate(format!("unexpected PEM tag {:?}", p.tag())));
        }
        let v = parse(p.contents())?;
        Ok(Certificate {
            subject: str_field(&v, "subject")?.to_string(),
            public_key: public_key_from_der(&unb64(str_field(&v, "public_key")?)?)?,
            signature: unb64(str_field(&v, "signature")?)?,
        })
    }
}

pub struct CertificateAuthority {
    key: RsaPrivateKey,
}

impl CertificateAuthority {
    pub fn generate(rng: &mut impl Rng) -> Self {
        CertificateAuthority { key: generate_rsa(rng) }
    }

    pub fn from_key(key: RsaPrivateKey) -> Self {
        CertificateAuthority { key }
    }

    pub fn key(&self) -> &RsaPrivateKey {
        &self.key
    }

    pub fn public_key(&self) -> RsaPublicKey {
        self.key.to_public_key()
    }

    pub fn issue(&self, subject: &str, key: &RsaPublicKey, rng: &mut impl Rng) -> Certificate {
        let signature = sign(&self.key, &Certificate::signed_bytes(subject, key), rng);
        Certificate { subject: subject.to_string(), public_key: key.clone(), signature }
    }
}

pub struct ClientIdentity {
    pub name: String,
    pub sym_key: SymKey,
    pub sign_key: RsaPrivateKey,
    pub certificate: Certificate,
}

impl ClientIdentity {
    pub fn generate(name: &str, ca: &CertificateAuthority, rng: &mut impl Rng) -> Self {
        let sym_key = SymKey::generate(rng);
        let sign_key = generate_rsa(rng);
        let certificate = ca.issue(name, &sign_key.to_public_key(), rng);
        ClientIdentity { name: name.to_string(), sym_key, sign_key, certificate }
    }

    pub fn public_key(&self) -> RsaPublicKey {
        self.sign_key.to_public_key()
    }

    /// Writes `<name>.key` (hex), `<name>.pem`, `<name>.pub.pem` and
    /// `<name>.crt` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.sym_key.save(&dir.join(format!("{}.key", self.name)))?;
        std::fs::write(dir.join(format!("{}.pem", self.name)), private_key_to_pem(&self.sign_key))?;
        std::fs::write(dir.join(format!("{}.pub.pem", self.name)), public_key_to_pem(&self.public_key()))?;
        std::fs::write(dir.join(format!("{}.crt", self.name)), self.certificate.to_pem())?;
        Ok(())
    }

    pub fn load(dir: &Path, name: &str) -> Result<Self> {
        let sym_key = SymKey::load(&dir.join(format!("{name}.key")))?;
        let sign_key = private_key_from_pem(&std::fs::read_to_string(dir.join(format!("{name}.pem")))?)?;
        let certificate = Certificate::from_pem(&std::fs::read_to_string(dir.join(format!("{name}.crt")))?)?;
        if certificate.public_key != sign_key.to_public_key() || certificate.subject != name {
            return Err(ProtocolError::BadCertificate(format!("certificate does not match key for {name:?}")));
        }
        Ok(ClientIdentity { name: name.to_string(), sym_key, sign_key, certificate })
    }
}

/// Key pair and deployment nonce generated inside the master enclave.
pub struct EnclaveIdentity {
    pub key: RsaPrivateKey,
    pub nonce: [u8; NONCE_BYTES],
    pub measurement: [u8; 32],
}

impl EnclaveIdentity {
    pub fn generate(measurement: [u8; 32], rng: &mut impl Rng) -> Self {
        let mut nonce = [0u8; NONCE_BYTES];
        rng.fill_bytes(&mut nonce);
        EnclaveIdentity { key: generate_rsa(rng), nonce, measurement }
    }

    pub fn public_key(&self) -> RsaPublicKey {
        self.key.to_public_key()
    }

    pub fn modulus_bits(&self) -> usize {
        self.key.n().bits()
    }
}

//! Key material on disk for a deployment.

use std::path::Path;

use sxgb_cluster::attest::{default_manifest, PlatformKey};
use sxgb_protocol::keys::{private_key_from_pem, private_key_to_pem, public_key_from_pem, public_key_to_pem, RsaPublicKey};
use sxgb_protocol::{CertificateAuthority, ClientIdentity, Deployment, Rng};

use crate::error::Result;

pub const CA_KEY: &str = "ca.pem";
pub const CA_PUB: &str = "ca.pub.pem";
pub const PLATFORM_KEY: &str = "platform.pem";
pub const PLATFORM_PUB: &str = "platform.pub.pem";
pub const DEPLOYMENT: &str = "deployment.txt";
pub const MANIFEST: &str = "build.manifest";

/// Creates the CA and platform keys unless present, then one identity per
/// client, the deployment file and the build manifest.
pub fn keygen(out: &Path, clients: &[String], rng: &mut impl Rng) -> Result<Vec<String>> {
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    fn put(out: &Path, written: &mut Vec<String>, name: &str, body: &[u8]) -> Result<()> {
        std::fs::write(out.join(name), body)?;
        written.push(name.to_string());
        Ok(())
    }
    let ca = match std::fs::read_to_string(out.join(CA_KEY)) {
        Ok(pem) => CertificateAuthority::from_key(private_key_from_pem(&pem)?),
        Err(_) => {
            let ca = CertificateAuthority::generate(rng);
            put(out, &mut written, CA_KEY, private_key_to_pem(ca.key()).as_bytes())?;
            put(out, &mut written, CA_PUB, public_key_to_pem(&ca.public_key()).as_bytes())?;
            ca
        }
    };
    if !out.join(PLATFORM_KEY).exists() {
        let p = PlatformKey::generate(rng);
        put(out, &mut written, PLATFORM_KEY, private_key_to_pem(p.key()).as_bytes())?;
        put(out, &mut written, PLATFORM_PUB, public_key_to_pem(&p.public_key()).as_bytes())?;
    }
    for name in clients {
        ClientIdentity::generate(name, &ca, rng).save(out)?;
        for ext in ["key", "pem", "pub.pem", "crt"] {
            written.push(format!("{name}.{ext}"));
        }
    }
    let mut all: std::collections::BTreeSet<String> = match std::fs::read_to_string(out.join(DEPLOYMENT)) {
        Ok(t) => Deployment::from_text(&t)?.clients,
        Err(_) => Default::default(),
    };
    all.extend(clients.iter().cloned());
    put(out, &mut written, DEPLOYMENT, Deployment { clients: all, ca: ca.public_key() }.to_text().as_bytes())?;
    if !out.join(MANIFEST).exists() {
        put(out, &mut written, MANIFEST, &default_manifest())?;
    }
    Ok(written)
}

pub fn load_platform_key(path: &Path) -> Result<PlatformKey> {
    Ok(PlatformKey::from_key(private_key_from_pem(&std::fs::read_to_string(path)?)?))
}

pub fn load_platform_public(path: &Path) -> Result<RsaPublicKey> {
    Ok(public_key_from_pem(&std::fs::read_to_string(path)?)?)
}

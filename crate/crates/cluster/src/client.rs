//! Client-side session: verifies the master's attestation, enrolls, and
//! signs commands with consecutive counters.

use std::collections::BTreeMap;

use rsa::RsaPublicKey;
use sxgb_protocol::keys::NONCE_BYTES;
use sxgb_protocol::{
    enroll_client, make_signed_command, ClientIdentity, EnrollmentMessage, Outcome, ProtocolError, ResponseBody, Seqn,
    SignedCommand, SignedResponse,
};

use crate::attest::AttestationReport;
use crate::error::Result;

pub struct ClientSession {
    pub identity: ClientIdentity,
    platform: RsaPublicKey,
    measurement: [u8; 32],
    enclave: Option<(RsaPublicKey, [u8; NONCE_BYTES])>,
    next_ctr: u64,
}

impl ClientSession {
    pub fn new(identity: ClientIdentity, platform: RsaPublicKey, measurement: [u8; 32]) -> Self {
        ClientSession { identity, platform, measurement, enclave: None, next_ctr: 1 }
    }

    pub fn name(&self) -> &str {
        &self.identity.name
    }

    pub fn attest(&mut self, report: &AttestationReport) -> Result<()> {
        report.verify(&self.platform, &self.measurement, 0)?;
        self.enclave = Some((report.public_key.clone(), report.nonce));
        Ok(())
    }

    fn enclave(&self) -> Result<&(RsaPublicKey, [u8; NONCE_BYTES])> {
        Ok(self.enclave.as_ref().ok_or_else(|| ProtocolError::Format("attest before talking to the enclave".into()))?)
    }

    pub fn enrollment(&self) -> Result<EnrollmentMessage> {
        let (pk, nonce) = self.enclave()?;
        Ok(enroll_client(&self.identity, pk, nonce, &mut rand::thread_rng())?)
    }

    pub fn next_seqn(&self) -> Result<Seqn> {
        Ok(Seqn { nonce: self.enclave()?.1, ctr: self.next_ctr })
    }

    /// Signs `func(params)` with the next counter value.
    pub fn command(&mut self, func: &str, params: BTreeMap<String, String>) -> Result<SignedCommand> {
        let nonce = self.enclave()?.1;
        let cmd = make_signed_command(&self.identity, nonce, self.next_ctr, func, params, &mut rand::thread_rng());
        self.next_ctr += 1;
        Ok(cmd)
    }

    /// Checks the enclave's signature and that the response answers `seqn`.
    pub fn verify(&self, seqn: &Seqn, response: &SignedResponse) -> Result<ResponseBody> {
        let body = response.verify(&self.enclave()?.0)?;
        if &body.seqn != seqn {
            return Err(ProtocolError::Format("response bound to another request".into()).into());
        }
        Ok(body)
    }

    /// The result addressed to this client, or the enclave's error message.
    pub fn open(&self, seqn: &Seqn, response: &SignedResponse) -> Result<std::result::Result<Vec<u8>, String>> {
        let body = self.verify(seqn, response)?;
        Ok(match body.outcome {
            Outcome::Ok if !body.sealed.iter().any(|b| b.recipient == self.name()) => Err(format!("no result for {}", self.name())),
            Outcome::Ok => Ok(body.open_for(self.name(), &self.identity.sym_key)?),
            Outcome::Error(m) => Err(m),
        })
    }
}

//! What a client talks to: the orchestrator, either in this process or
//! behind a socket.

use sxgb_protocol::{EnrollmentMessage, Seqn, SignedCommand};

use crate::attest::AttestationReport;
use crate::error::Result;
use crate::master::MasterService;
use crate::orchestrator::{Orchestrator, Reply};
use crate::storage::Storage;

pub trait Endpoint {
    fn attest(&mut self) -> Result<AttestationReport>;
    fn enroll(&mut self, msg: &EnrollmentMessage) -> Result<()>;
    fn submit(&mut self, cmd: SignedCommand) -> Result<Seqn>;
    fn fetch(&mut self, seqn: &Seqn) -> Result<Option<Reply>>;
}

/// Orchestrator and master enclave in one address space.
pub struct InProcess<S> {
    pub orchestrator: Orchestrator,
    pub master: MasterService<S>,
}

impl<S: Storage> InProcess<S> {
    /// Relays every complete command set to the master. Returns how many
    /// sets were relayed.
    pub fn pump(&mut self) -> usize {
        let mut n = 0;
        while let Some((seqn, set)) = self.orchestrator.dispatch() {
            let reply = match self.master.execute(&set) {
                Ok(r) => Reply::Response(r),
                Err(e) => Reply::Rejected(e.to_string()),
            };
            self.orchestrator.post(seqn, reply);
            n += 1;
        }
        n
    }
}

impl<S: Storage> Endpoint for InProcess<S> {
    fn attest(&mut self) -> Result<AttestationReport> {
        Ok(self.master.report().clone())
    }

    fn enroll(&mut self, msg: &EnrollmentMessage) -> Result<()> {
        self.master.enroll(msg)
    }

    fn submit(&mut self, cmd: SignedCommand) -> Result<Seqn> {
        let seqn = self.orchestrator.submit(cmd)?;
        self.pump();
        Ok(seqn)
    }

    fn fetch(&mut self, seqn: &Seqn) -> Result<Option<Reply>> {
        Ok(self.orchestrator.fetch(seqn).cloned())
    }
}

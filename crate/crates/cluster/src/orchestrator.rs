//! Untrusted relay between clients and the master enclave. It buffers
//! signed commands per sequence number and forwards a set once every client
//! has submitted. Nothing it checks is relied on; the enclave re-verifies.

use std::collections::{BTreeMap, BTreeSet};

use sxgb_protocol::command::Command;
use sxgb_protocol::{ProtocolError, Seqn, SignedCommand, SignedResponse};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reply {
    Response(SignedResponse),
    /// The enclave refused the set before executing anything.
    Rejected(String),
}

#[derive(Debug, Default)]
pub struct Orchestrator {
    clients: BTreeSet<String>,
    pending: BTreeMap<Seqn, BTreeMap<String, SignedCommand>>,
    dispatched: BTreeSet<Seqn>,
    replies: BTreeMap<Seqn, Reply>,
}

impl Orchestrator {
    pub fn new(clients: impl IntoIterator<Item = String>) -> Self {
        Orchestrator { clients: clients.into_iter().collect(), ..Default::default() }
    }

    /// Buffers a submission. Resubmissions for an already relayed sequence
    /// number are accepted and dropped.
    pub fn submit(&mut self, cmd: SignedCommand) -> Result<Seqn> {
        if !self.clients.contains(&cmd.signer) {
            return Err(ProtocolError::UnknownClient(cmd.signer).into());
        }
        let seqn = Command::from_canonical(&cmd.payload)?.seqn;
        if !self.dispatched.contains(&seqn) {
            self.pending.entry(seqn).or_default().insert(cmd.signer.clone(), cmd);
        }
        Ok(seqn)
    }

    /// The lowest complete set not yet relayed, if any.
    pub fn dispatch(&mut self) -> Option<(Seqn, Vec<SignedCommand>)> {
        let seqn = *self.pending.iter().find(|(_, subs)| subs.len() == self.clients.len())?.0;
        let set = self.pending.remove(&seqn)?.into_values().collect();
        self.dispatched.insert(seqn);
        Some((seqn, set))
    }

    pub fn post(&mut self, seqn: Seqn, reply: Reply) {
        self.replies.insert(seqn, reply);
    }

    pub fn fetch(&self, seqn: &Seqn) -> Option<&Reply> {
        self.replies.get(seqn)
    }

    pub fn pending(&self, seqn: &Seqn) -> usize {
        self.pending.get(seqn).map_or(0, BTreeMap::len)
    }
}

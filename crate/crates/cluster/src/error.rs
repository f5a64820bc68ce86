use sxgb_protocol::ProtocolError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("node {node}: measurement does not match its parent's")]
    MeasurementMismatch { node: usize },
    #[error("attestation report signature invalid")]
    AttestationSignatureInvalid,
    #[error("topology: {0}")]
    Topology(String),
    #[error("channel {from}->{to}: {reason}")]
    Channel { from: usize, to: usize, reason: String },
    #[error("config: {0}")]
    Config(String),
    #[error("storage: {0}")]
    Storage(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Core(#[from] sxgb_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ClusterError> = std::result::Result<T, E>;

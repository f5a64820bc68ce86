use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("record {index}: authentication failed")]
    Tamper { index: u32 },
    #[error("row index {0} appears more than once")]
    DuplicateIndex(u32),
    #[error("row index {index} outside 1..={total}")]
    IndexOutOfRange { index: u32, total: u32 },
    #[error("record claims {got} rows, expected {expected}")]
    InconsistentTotal { expected: u32, got: u32 },
    #[error("row coverage incomplete: missing {missing:?}, duplicated {duplicated:?}")]
    Coverage { missing: Vec<u32>, duplicated: Vec<u32> },
    #[error("unknown client {0:?}")]
    UnknownClient(String),
    #[error("client {0:?} signed more than once")]
    DuplicateSigner(String),
    #[error("no command from client {0:?}")]
    MissingClient(String),
    #[error("bad signature from {0:?}")]
    SignatureMismatch(String),
    #[error("command from {0:?} differs from the others")]
    PayloadDivergence(String),
    #[error("sequence number carries the wrong deployment nonce")]
    WrongNonce,
    #[error("stale sequence number {got}, expected {expected}")]
    StaleSequence { expected: u64, got: u64 },
    #[error("sequence number {got} skips ahead of {expected}")]
    OutOfOrderSequence { expected: u64, got: u64 },
    #[error("bad certificate: {0}")]
    BadCertificate(String),
    #[error("bad signature: {0}")]
    BadSignature(String),
    #[error("crypto: {0}")]
    Crypto(String),
    #[error("format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ProtocolError> = std::result::Result<T, E>;

//! Client and enclave key material, the encrypted row file format, and the
//! signed envelopes exchanged between clients and the enclave cluster.
//!
//! ```
//! use rand::rngs::OsRng;
//! use sxgb_protocol::rows::{decrypt_partition, encrypt_dataset};
//! use sxgb_protocol::SymKey;
//!
//! let key = SymKey::generate(&mut OsRng);
//! let rows = vec!["1,0.5,2".to_string(), "0,1.5,-3".to_string()];
//! let records = encrypt_dataset(&rows, &key, &mut OsRng);
//! let part = decrypt_partition(&records, &key, 2).unwrap();
//! assert_eq!(part.rows, vec![(1, rows[0].clone()), (2, rows[1].clone())]);
//! ```

pub mod command;
pub mod enroll;
pub mod error;
pub mod keys;
pub mod response;
pub mod rows;
pub mod wire;

pub use command::{make_signed_command, Command, CommandGate, Seqn, SignedCommand};
pub use enroll::{enroll_client, verify_enrollment, Deployment, Enrollment, EnrollmentMessage};
pub use error::{ProtocolError, Result};
pub use keys::{Certificate, CertificateAuthority, ClientIdentity, EnclaveIdentity, SymKey};
pub use response::{sign_response, Outcome, ResponseBody, SealedBlob, SignedResponse};
pub use rows::{check_indices, decrypt_partition, encrypt_dataset, verify_coverage, EncryptedRowRecord};

/// Random source accepted by every key-generating or signing operation.
pub trait Rng: rand::RngCore + rand::CryptoRng {}
impl<T: rand::RngCore + rand::CryptoRng> Rng for T {}

//! A simulated enclave cluster: attested nodes in a tree rooted at the
//! master, sealed channels between neighbors, the untrusted orchestrator,
//! and a framed TCP transport for running the pieces as separate services.
//!
//! Training inside the cluster uses [`ClusterCollective`], which sums
//! histograms and gathers quantile summaries over the tree. Because the
//! histogram sums are exact, a cluster-trained model is byte-identical to one
//! trained by [`sxgb_core::train_with_sketch`] on the same partitions.

pub mod attest;
pub mod channel;
pub mod client;
pub mod cluster;
pub mod codec;
pub mod collective;
pub mod config;
pub mod endpoint;
pub mod error;
pub mod master;
pub mod net;
pub mod orchestrator;
pub mod sim;
pub mod storage;
pub mod topology;

pub use attest::{default_manifest, measure, AttestationReport, PlatformKey};
pub use client::ClientSession;
pub use cluster::{attest_cluster, launch, Cluster, EnclaveNode};
pub use collective::ClusterCollective;
pub use config::ClusterConfig;
pub use endpoint::{Endpoint, InProcess};
pub use error::{ClusterError, Result};
pub use master::MasterService;
pub use orchestrator::{Orchestrator, Reply};
pub use sim::Simulation;
pub use storage::{DirStorage, MemoryStorage, Storage};
pub use topology::Topology;

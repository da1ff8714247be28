//! Vertically federated PCA and adaptive kernel PCA on a single machine.
//!
//! Clients hold disjoint feature blocks of the same samples, run local power
//! iteration on their sample-space matrices and exchange (eigenvector,
//! eigenvalue) pairs with a server or with graph neighbours.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod federation;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod runner;
pub mod topology;

pub use error::{Error, Result};
pub use federation::{
    make_clients, run_decentralized, run_server_client, ClientState, FederationConfig, LocalMode,
    MergeMode,
};
pub use kernel::KernelSpec;
pub use linalg::{DenseMatrix, EigenPair};
pub use metrics::{distance_error, kmeans, KMeansResult, RunTrace};
pub use topology::TopologyGraph;

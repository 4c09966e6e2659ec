//! Cloud side of the retrieval scheme: ingests client packages, computes
//! encrypted signatures without any client interaction, persists them and
//! answers top-k queries over a small TCP protocol.

pub mod compute;
pub mod error;
pub mod service;
pub mod store;
pub mod wire;

use std::path::PathBuf;

pub use compute::{compute_signature, ComputedSignature, ServerOps};
pub use error::{Result, ServerError};
pub use service::{IngestReceipt, QueryHit, QueryResponse, Service, DEFAULT_K};

/// Environment variable naming the store directory.
pub const STORE_ENV: &str = "SOCBIR_STORE";

/// Store directory: explicit value, else `$SOCBIR_STORE`, else `./store`.
pub fn store_path(explicit: Option<PathBuf>) -> PathBuf {
    explicit
        .or_else(|| std::env::var_os(STORE_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("store"))
}

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use socbir_core::package::{deserialize_package, serialize_package, UploadPackage};
use socbir_core::paillier::op_counts;
use socbir_core::signature::{encrypted_l1, rank_by_distance, SignatureConfig};

use crate::compute::{compute_signature, ServerOps};
use crate::error::{Result, ServerError};
use crate::store::{validate_id, EntryMeta, Store};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReceipt {
    pub id: String,
    pub ops: ServerOps,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryHit {
    pub id: String,
    pub distance: u64,
    pub rank: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub results: Vec<QueryHit>,
    pub ops: ServerOps,
}

#[derive(Debug, Default)]
pub struct ServiceStats {
    pub ingests: AtomicU64,
    pub queries: AtomicU64,
}

/// The cloud role. Holds the public configuration and the store; never a
/// private key.
#[derive(Debug)]
pub struct Service {
    config: SignatureConfig,
    store: RwLock<Store>,
    stats: ServiceStats,
}

impl Service {
    pub fn open(root: impl Into<std::path::PathBuf>, config: SignatureConfig) -> Result<Self> {
        let store = Store::open(root, &config)?;
        Ok(Service {
            config,
            store: RwLock::new(store),
            stats: ServiceStats::default(),
        })
    }

    pub fn config(&self) -> &SignatureConfig {
        &self.config
    }

    pub fn stats(&self) -> &ServiceStats {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.store.read().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn with_store<T>(&self, f: impl FnOnce(&Store) -> T) -> T {
        f(&self.store.read().expect("store lock"))
    }

    pub fn ingest_text(&self, package_text: &str, label: &str) -> Result<IngestReceipt> {
        let pkg = deserialize_package(package_text)?;
        self.ingest_parsed(&pkg, package_text, label)
    }

    pub fn ingest(&self, pkg: &UploadPackage, label: &str) -> Result<IngestReceipt> {
        self.ingest_parsed(pkg, &serialize_package(pkg), label)
    }

    fn ingest_parsed(&self, pkg: &UploadPackage, text: &str, label: &str) -> Result<IngestReceipt> {
        self.stats.ingests.fetch_add(1, Ordering::Relaxed);
        let id = pkg.header.image_id.clone();
        validate_id(&id)?;
        if self.store.read().expect("store lock").contains(&id) {
            return Err(ServerError::Conflict(id));
        }
        let computed = compute_signature(pkg, &self.config)?;
        let meta = EntryMeta {
            id: id.clone(),
            label: label.to_owned(),
            ingested_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            fingerprint: computed.signature.fingerprint.clone(),
            key_id: pkg.header.key_id,
            width: pkg.header.width,
            height: pkg.header.height,
        };
        self.store
            .write()
            .expect("store lock")
            .insert(meta, text, computed.signature)?;
        Ok(IngestReceipt { id, ops: computed.ops })
    }

    pub fn query_text(&self, package_text: &str, k: usize) -> Result<QueryResponse> {
        self.query(&deserialize_package(package_text)?, k)
    }

    /// Computes the query signature, then ranks every stored image of the
    /// same dimensions by encrypted L1 distance. The query is not stored.
    pub fn query(&self, pkg: &UploadPackage, k: usize) -> Result<QueryResponse> {
        self.stats.queries.fetch_add(1, Ordering::Relaxed);
        if k == 0 {
            return Err(socbir_core::Error::InvalidParameter("k must be at least 1".into()).into());
        }
        let computed = compute_signature(pkg, &self.config)?;
        let mut ops = computed.ops;
        let query = computed.signature;
        let before = op_counts();
        let store = self.store.read().expect("store lock");
        let mut scored = Vec::new();
        for entry in store.entries() {
            let Some(sig) = &entry.signature else { continue };
            if (sig.width, sig.height) != (query.width, query.height) {
                continue;
            }
            scored.push((entry.meta.id.clone(), encrypted_l1(&query, sig)?));
        }
        if scored.is_empty() {
            return Err(ServerError::EmptyStore);
        }
        ops.add(&ServerOps::from_counts(op_counts().since(&before)));
        let results = rank_by_distance(scored, k)
            .into_iter()
            .map(|r| QueryHit {
                label: store.get(&r.id).map(|e| e.meta.label.clone()).unwrap_or_default(),
                id: r.id,
                distance: r.distance,
                rank: r.rank,
            })
            .collect();
        Ok(QueryResponse { results, ops })
    }
}

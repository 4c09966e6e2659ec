//! Directory-backed store:
//!
//! ```text
//! <root>/index.json
//! <root>/<id>/package.socbir
//! <root>/<id>/signature.socbir-sig
//! ```
//!
//! Files are written to a temporary name and renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use socbir_core::package::deserialize_package;
use socbir_core::paillier::KeyId;
use socbir_core::signature::{deserialize_signature, serialize_signature, EncryptedSignature, SignatureConfig};

use crate::compute::compute_signature;
use crate::error::{Result, ServerError};

pub const INDEX_FILE: &str = "index.json";
pub const PACKAGE_FILE: &str = "package.socbir";
pub const SIGNATURE_FILE: &str = "signature.socbir-sig";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryMeta {
    pub id: String,
    /// Opaque client metadata; stored and returned, never interpreted.
    pub label: String,
    /// Seconds since the Unix epoch.
    pub ingested_at: u64,
    pub fingerprint: String,
    pub key_id: KeyId,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexDoc {
    version: u32,
    entries: Vec<EntryMeta>,
}

#[derive(Debug, Clone)]
pub struct StoreEntry {
    pub meta: EntryMeta,
    /// `None` when the cached signature was built under another
    /// configuration and cannot be recomputed from the package.
    pub signature: Option<EncryptedSignature>,
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    entries: BTreeMap<String, StoreEntry>,
}

pub fn validate_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || b"._-".contains(&b));
    if ok {
        Ok(())
    } else {
        Err(ServerError::InvalidId(id.to_owned()))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

impl Store {
    /// Opens or creates the store, loading cached signatures. Signatures
    /// whose fingerprint differs from `config` are dropped and recomputed
    /// from the stored package when possible.
    pub fn open(root: impl Into<PathBuf>, config: &SignatureConfig) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let index_path = root.join(INDEX_FILE);
        let metas = if index_path.exists() {
            let doc: IndexDoc =
                serde_json::from_slice(&fs::read(&index_path)?).map_err(|e| ServerError::Index(e.to_string()))?;
            if doc.version != 1 {
                return Err(ServerError::Index(format!("unsupported index version {}", doc.version)));
            }
            doc.entries
        } else {
            Vec::new()
        };
        let fingerprint = config.fingerprint();
        let mut entries = BTreeMap::new();
        for meta in metas {
            validate_id(&meta.id)?;
            let dir = root.join(&meta.id);
            let sig_path = dir.join(SIGNATURE_FILE);
            let cached = match fs::read_to_string(&sig_path) {
                Ok(text) => Some(deserialize_signature(&text)?),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
                Err(e) => return Err(e.into()),
            };
            let signature = match cached {
                Some(sig) if sig.fingerprint == fingerprint => Some(sig),
                _ => {
                    if sig_path.exists() {
                        fs::remove_file(&sig_path)?;
                    }
                    let pkg = deserialize_package(&fs::read_to_string(dir.join(PACKAGE_FILE))?)?;
                    match compute_signature(&pkg, config) {
                        Ok(computed) => {
                            write_atomic(&sig_path, serialize_signature(&computed.signature).as_bytes())?;
                            Some(computed.signature)
                        }
                        Err(socbir_core::Error::FingerprintMismatch { .. }) => None,
                        Err(e) => return Err(e.into()),
                    }
                }
            };
            entries.insert(meta.id.clone(), StoreEntry { meta, signature });
        }
        Ok(Store { root, entries })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&StoreEntry> {
        self.entries.get(id)
    }

    /// Entries in id order.
    pub fn entries(&self) -> impl Iterator<Item = &StoreEntry> {
        self.entries.values()
    }

    pub fn insert(&mut self, meta: EntryMeta, package_text: &str, signature: EncryptedSignature) -> Result<()> {
        validate_id(&meta.id)?;
        if self.entries.contains_key(&meta.id) {
            return Err(ServerError::Conflict(meta.id));
        }
        let dir = self.root.join(&meta.id);
        fs::create_dir_all(&dir)?;
        write_atomic(&dir.join(PACKAGE_FILE), package_text.as_bytes())?;
        write_atomic(&dir.join(SIGNATURE_FILE), serialize_signature(&signature).as_bytes())?;
        self.entries.insert(
            meta.id.clone(),
            StoreEntry {
                meta,
                signature: Some(signature),
            },
        );
        self.write_index()
    }

    fn write_index(&self) -> Result<()> {
        let doc = IndexDoc {
            version: 1,
            entries: self.entries.values().map(|e| e.meta.clone()).collect(),
        };
        let bytes = serde_json::to_vec_pretty(&doc).map_err(|e| ServerError::Index(e.to_string()))?;
        write_atomic(&self.root.join(INDEX_FILE), &bytes)
    }
}

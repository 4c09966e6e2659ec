//! Zero-interaction secure outsourced content-based image retrieval.
//!
//! A client encrypts an image with Paillier (`g = 1 + Kp`) and ships it
//! with ancillary ciphertexts. From those alone, a server computes the
//! wavelet transform, noisy and then encrypted sub-band histograms, and
//! L1 distances between signatures of users holding different keys.

pub mod compare;
pub mod error;
mod format;
pub mod hexint;
pub mod histogram;
pub mod package;
pub mod paillier;
pub mod signature;
pub mod wavelet;

pub use error::{Error, Result};
pub use histogram::{HistogramMode, HistogramSpec};
pub use package::{build_package, deserialize_package, payload_count, serialize_package, ClientSecrets, UploadPackage};
pub use paillier::{keygen, Ciphertext, KeyId, Keypair, PrivateKey, PublicKey, SignedPlain, TrackedRandom};
pub use signature::{ClassLayout, EncryptedSignature, RankedResult, SignatureConfig};
pub use wavelet::{BandId, Grid, IntegerFilterPair};

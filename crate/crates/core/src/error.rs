use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// The signed value does not fit in `[-(Kp-1)/2, (Kp-1)/2]`.
    #[error("plaintext {value} exceeds the signed capacity {bound} of the key")]
    PlaintextOverflow { value: String, bound: String },

    #[error("random value is not a unit modulo the public modulus")]
    InvalidRandom,

    #[error("malformed ciphertext")]
    MalformedCiphertext,

    #[error("ciphertexts belong to different keys")]
    KeyMismatch,

    /// Two ciphertexts were expected to share a random value but do not.
    #[error("ciphertexts do not share a random value")]
    RandomMismatch,

    #[error("difference not reached within {0} iterations")]
    OutOfRange(u64),

    #[error("key generation failed: {0}")]
    KeyGeneration(String),

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("quantized filter is all zeros")]
    DegenerateFilter,

    #[error("coefficient {value} outside band dynamic [{lo}, {hi}]")]
    DynamicBound { value: i64, lo: i64, hi: i64 },

    #[error("malformed package: {0}")]
    MalformedPackage(String),

    #[error("spec fingerprint mismatch: expected {expected}, found {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Serialized data failed to parse: version, truncation, checksum or
    /// integer syntax.
    #[error("format: {0}")]
    Format(String),

    #[error("incomplete band set: {0}")]
    IncompleteBands(String),
}

impl Error {
    pub(crate) fn overflow(value: impl ToString, bound: impl ToString) -> Self {
        Error::PlaintextOverflow {
            value: value.to_string(),
            bound: bound.to_string(),
        }
    }
}

use thiserror::Error;

pub type Result<T, E = ServerError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error(transparent)]
    Core(#[from] socbir_core::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("image id {0:?} already stored")]
    Conflict(String),

    #[error("invalid image id {0:?}")]
    InvalidId(String),

    #[error("store holds no image matching the query configuration")]
    EmptyStore,

    #[error("protocol: {0}")]
    Protocol(String),

    #[error("store index: {0}")]
    Index(String),

    /// Error reported by the remote end of a connection.
    #[error("remote {kind}: {message}")]
    Remote { kind: String, message: String },
}

impl ServerError {
    /// Stable short name used on the wire.
    pub fn kind(&self) -> &'static str {
        use socbir_core::Error as E;
        match self {
            ServerError::Core(E::FingerprintMismatch { .. }) => "fingerprint_mismatch",
            ServerError::Core(E::MalformedPackage(_) | E::Format(_) | E::IncompleteBands(_)) => "malformed_package",
            ServerError::Core(E::RandomMismatch) => "random_mismatch",
            ServerError::Core(_) => "crypto",
            ServerError::Io(_) => "io",
            ServerError::Conflict(_) => "conflict",
            ServerError::InvalidId(_) => "invalid_id",
            ServerError::EmptyStore => "empty_store",
            ServerError::Protocol(_) => "protocol",
            ServerError::Index(_) => "index",
            ServerError::Remote { .. } => "remote",
        }
    }
}

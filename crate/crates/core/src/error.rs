use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Graph structure violates acyclicity or layering.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    /// A CPDAG admits no consistent DAG extension.
    #[error("CPDAG is not extendable: {0}")]
    NotExtendable(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    /// A fit failed for a particular target node.
    #[error("fit failed for target `{target}`: {source}")]
    Fit {
        target: String,
        #[source]
        source: Box<Error>,
    },

    #[error("model file version {found} is not supported (this build reads version {supported})")]
    Version { found: u32, supported: u32 },

    #[error("checksum mismatch in section `{0}`")]
    Checksum(String),

    #[error("model file truncated: {0}")]
    Truncated(String),

    #[error("malformed model file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse error class used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Numeric(_) | Error::Degenerate(_) | Error::NotExtendable(_) => ErrorKind::Numeric,
            Error::Fit { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Input,
        }
    }

    pub(crate) fn for_target(self, target: &str) -> Error {
        Error::Fit {
            target: target.to_string(),
            source: Box::new(self),
        }
    }
}

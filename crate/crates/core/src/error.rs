use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("numeric domain violation in {op}: {detail}")]
    NumericDomain { op: &'static str, detail: String },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed data: {0}")]
    Data(String),

    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("could not parse scores for sample {sample_id}: reply was {reply:?}")]
    ScoringParse { sample_id: usize, reply: String },

    #[error("credential rejected by scoring endpoint (HTTP {status})")]
    Credential { status: u16 },

    #[error("transport failure for sample {sample_id}: {detail}")]
    Transport { sample_id: usize, detail: String },

    #[error("training diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Short machine-readable category, printed by the CLI on failure.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Dimension { .. }
            | Error::NumericDomain { .. }
            | Error::Contract(_)
            | Error::Data(_)
            | Error::NotFound(_)
            | Error::Io { .. } => "data",
            Error::ScoringParse { .. } => "scoring-parse",
            Error::Credential { .. } => "credential",
            Error::Transport { .. } => "transport",
            Error::Divergence { .. } => "divergence",
        }
    }

    /// Process exit code: 2 config, 3 data, 4 transport, 5 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::ScoringParse { .. } | Error::Credential { .. } | Error::Transport { .. } => 4,
            Error::Divergence { .. } => 5,
            _ => 3,
        }
    }
}

use thiserror::Error;

/// Errors raised by the separation toolkit.
#[derive(Debug, Error)]
pub enum AssoError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("branch_sqrt requires Re(z) > 0, got {re} + {im}j")]
    Domain { re: f64, im: f64 },

    #[error("degenerate window at frame {frame}: sigma = {sigma} s covers only {samples} samples")]
    DegenerateWindow {
        frame: usize,
        sigma: f64,
        samples: usize,
    },

    #[error("no spectral peak above zero in the time-frequency plane")]
    NoPeak,

    #[error("seed magnitude {magnitude} does not exceed the ridge threshold {threshold}")]
    EmptyRidge { magnitude: f64, threshold: f64 },

    #[error("chirp-rate fit needs at least 3 ridge points, found {found}")]
    InsufficientData { found: usize },

    #[error("local energy is zero; entropy undefined at frame {frame}")]
    UndefinedEntropy { frame: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, AssoError>;

impl AssoError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        AssoError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        AssoError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// 2 usage, 3 I/O, 4 config, 5 numeric degeneracy.
    pub fn exit_code(&self) -> i32 {
        match self {
            AssoError::Usage(_) => 2,
            AssoError::Io { .. } | AssoError::Format { .. } => 3,
            AssoError::Config(_) | AssoError::InvalidParameter { .. } => 4,
            AssoError::InvalidSignal(_)
            | AssoError::Domain { .. }
            | AssoError::DegenerateWindow { .. }
            | AssoError::NoPeak
            | AssoError::EmptyRidge { .. }
            | AssoError::InsufficientData { .. }
            | AssoError::UndefinedEntropy { .. } => 5,
        }
    }
}

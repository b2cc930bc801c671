//! Command-line harness internals: file formats, configuration,
//! pipeline drivers and overlay rendering for the centergrid library.

pub mod ann;
pub mod config;
pub mod io;
pub mod pipeline;
pub mod viz;

/// CLI failure modes, mapped onto the documented exit codes:
/// 0 success, 1 tolerance failure, 2 malformed input / IO / usage.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {detail}")]
    Schema { path: String, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("tolerance exceeded: {0}")]
    Tolerance(String),

    #[error(transparent)]
    Core(#[from] centergrid::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Tolerance(_) => 1,
            _ => 2,
        }
    }

    pub fn schema(path: impl AsRef<std::path::Path>, detail: impl Into<String>) -> Self {
        CliError::Schema {
            path: path.as_ref().display().to_string(),
            detail: detail.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

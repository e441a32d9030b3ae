use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("not supported: {0}")]
    Capability(String),

    #[error("Fock truncation at cutoff {cutoff} leaves tail {tail:.3e} (bound {bound:.1e}); try cutoff {suggested}")]
    Truncation {
        cutoff: usize,
        tail: f64,
        bound: f64,
        suggested: usize,
    },

    #[error("zero-weight event: {0}")]
    ZeroWeight(String),

    #[error("grid resolution: {0}")]
    Resolution(String),

    #[error("sampling range: {0}")]
    Range(String),

    #[error("coverage: input tail mass {missing:.3e} lies beyond the largest amplitude {max_amplitude}")]
    Coverage { missing: f64, max_amplitude: f64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("format: {0}")]
    Format(String),

    #[error("numerical contract violated: {0}")]
    Numerical(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn in_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    /// Whether this error reports a broken numerical contract rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical(_)
            | Error::Resolution(_)
            | Error::Truncation { .. }
            | Error::Range(_) => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

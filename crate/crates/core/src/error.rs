use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
///
/// The variants are grouped so that a front end can map them onto distinct
/// exit codes: see [`Error::kind`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {msg}", location(path, *line))]
    Format {
        path: Option<PathBuf>,
        line: Option<usize>,
        msg: String,
    },

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("split violation: {0}")]
    SplitViolation(String),

    #[error("out of vocabulary: no token of {0:?} has a word vector")]
    OutOfVocabulary(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("provider error: {0}")]
    Provider(String),

    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad configuration, manifests, or violated preconditions.
    Config,
    /// Malformed input files.
    DataFormat,
    /// Network, authentication, or provider failures (including offline cache misses).
    Transport,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Format { .. } | Error::Io { .. } => ErrorKind::DataFormat,
            Error::Transport(_) | Error::Provider(_) => ErrorKind::Transport,
            Error::Shape { .. }
            | Error::Contract(_)
            | Error::Manifest(_)
            | Error::SplitViolation(_)
            | Error::OutOfVocabulary(_) => ErrorKind::Config,
        }
    }

    pub(crate) fn format(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: None,
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a file path to a format error that was raised without one.
    pub(crate) fn at_path(self, p: &std::path::Path) -> Self {
        match self {
            Error::Format { path: None, line, msg } => Error::Format {
                path: Some(p.to_path_buf()),
                line,
                msg,
            },
            other => other,
        }
    }
}

fn location(path: &Option<PathBuf>, line: Option<usize>) -> String {
    match (path, line) {
        (Some(p), Some(l)) => format!("format error at {}:{l}", p.display()),
        (Some(p), None) => format!("format error in {}", p.display()),
        (None, Some(l)) => format!("format error at line {l}"),
        (None, None) => "format error".to_string(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;

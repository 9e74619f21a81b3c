use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Where in an input file a parse error was detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    Byte(u64),
    Line(u64),
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::Byte(b) => write!(f, "byte {b}"),
            Position::Line(l) => write!(f, "line {l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    MalformedHeader(String),
    ShapeMismatch(String),
    LabelOutOfRange { label: i64, num_classes: usize },
    NonFinite,
    Truncated,
    InvalidText(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::MalformedHeader(msg) => write!(f, "malformed header: {msg}"),
            ParseErrorKind::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            ParseErrorKind::LabelOutOfRange { label, num_classes } => {
                write!(f, "label {label} outside 1..={num_classes}")
            }
            ParseErrorKind::NonFinite => write!(f, "non-finite sample value"),
            ParseErrorKind::Truncated => write!(f, "unexpected end of file"),
            ParseErrorKind::InvalidText(msg) => write!(f, "invalid text: {msg}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {position}: {kind}")]
    Parse {
        position: Position,
        kind: ParseErrorKind,
    },

    #[error("empty set")]
    EmptySet,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("label {label} outside 1..={num_classes}")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("class {class} has {count} epochs, at least {needed} required")]
    TooFewEpochs {
        class: usize,
        count: usize,
        needed: usize,
    },

    #[error("band {low_hz}-{high_hz} Hz is invalid at sampling rate {sampling_rate} Hz")]
    InvalidBand {
        low_hz: f64,
        high_hz: f64,
        sampling_rate: f64,
    },

    #[error("block {block}: {message}")]
    Block { block: usize, message: String },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("training loss became non-finite at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("data-flow violation: {0}")]
    DataFlow(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(position: Position, kind: ParseErrorKind) -> Self {
        Error::Parse { position, kind }
    }

    /// True when the error stems from invalid input or configuration rather
    /// than a failure while computing.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io { .. } | Error::Singular(_) | Error::Diverged { .. } | Error::DataFlow(_)
        )
    }
}

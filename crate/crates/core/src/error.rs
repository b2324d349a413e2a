use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("truth degree {0} outside [0, 1]")]
    DegreeOutOfRange(f64),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("resolve: {0}")]
    Resolve(String),

    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error("scene {path}:{line}: {message}")]
    Scene {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl std::fmt::Display, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_string(),
            message: message.into(),
        }
    }

    pub fn is_parse(&self) -> bool {
        matches!(self, Error::Parse { .. })
    }
}

/// Non-fatal conditions reported alongside a valid result.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    LabelAbsent(u32),
    EmptySupport,
    NoLoopDetected { closing_radius_mm: f64 },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::LabelAbsent(label) => write!(f, "label {label} does not occur in the volume"),
            Warning::EmptySupport => write!(f, "reference region has empty support"),
            Warning::NoLoopDetected { closing_radius_mm } => write!(
                f,
                "no loop detected by closing with radius {closing_radius_mm} mm"
            ),
        }
    }
}

/// A value paired with an optional warning.
#[derive(Debug, Clone)]
pub struct Warned<T> {
    pub value: T,
    pub warning: Option<Warning>,
}

impl<T> Warned<T> {
    pub fn ok(value: T) -> Self {
        Warned {
            value,
            warning: None,
        }
    }

    pub fn warn(value: T, warning: Warning) -> Self {
        log::warn!("{warning}");
        Warned {
            value,
            warning: Some(warning),
        }
    }

    pub fn into_inner(self) -> T {
        self.value
    }
}

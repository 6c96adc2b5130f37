use std::fmt;
use std::path::{Path, PathBuf};

use apmob_core::adapt::AdaptError;
use apmob_core::hierarchy::HierarchyError;
use apmob_core::ingest::IngestError;
use apmob_core::model::ModelError;
use apmob_core::profiling::ProfilingError;
use apmob_core::sessions::SessionError;
use apmob_core::synth::SynthError;
use apmob_core::validate::ValidateError;
use apmob_core::ErrorKind;
use serde::Serialize;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or a malformed configuration document.
    Usage(String),
    Io { path: PathBuf, source: std::io::Error },
    Core(apmob_core::Error),
    /// An invariant check reported problems (already printed).
    Invalid(String),
    /// Some pipeline regions failed; `kind` is the most severe failure.
    Regions { failed: usize, total: usize, kind: ErrorKind },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_owned(), source }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::Io { .. } => "io",
            Self::Invalid(_) => "validation",
            Self::Core(e) => kind_name(e.kind()),
            Self::Regions { kind, .. } => kind_name(*kind),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Io { .. } => 1,
            Self::Invalid(_) => 2,
            Self::Core(e) => kind_code(e.kind()),
            Self::Regions { kind, .. } => kind_code(*kind),
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Payload<'a> {
            error: &'a str,
            exit_code: i32,
            message: String,
        }
        let p = Payload { error: self.kind(), exit_code: self.exit_code(), message: self.to_string() };
        serde_json::to_string(&p).expect("plain struct serializes")
    }
}

fn kind_name(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Io => "io",
        ErrorKind::Validation => "validation",
        ErrorKind::Data => "data",
    }
}

fn kind_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Io => 1,
        ErrorKind::Validation => 2,
        ErrorKind::Data => 3,
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(msg) | Self::Invalid(msg) => f.write_str(msg),
            Self::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Self::Core(e) => write!(f, "{e}"),
            Self::Regions { failed, total, .. } => write!(f, "{failed} of {total} regions failed"),
        }
    }
}

impl std::error::Error for CliError {}

macro_rules! from_core {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self::Core(e.into())
            }
        })*
    };
}

from_core!(
    apmob_core::Error,
    IngestError,
    HierarchyError,
    SessionError,
    ProfilingError,
    ModelError,
    SynthError,
    AdaptError,
    ValidateError
);

//! Hierarchical user-mobility models built from wireless access logs.
//!
//! The flow is: [`ingest`] a `<time_stamp, user_id, ap_id>` log, describe the
//! site as a [`hierarchy`] of regions and zones, cut each user's samples into
//! [`sessions`], group sessions into user types ([`profiling`]), and build one
//! first-order [`model`] per region. Models drive the trace generator in
//! [`synth`], can be transformed with [`adapt`] and are checked by the round
//! trip in [`validate`].

pub mod adapt;
pub mod campus;
pub mod hierarchy;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod profiling;
pub mod sessions;
pub mod synth;
pub mod validate;

pub use adapt::{apply_script, AdaptError, AdaptationScript, Directive};
pub use hierarchy::{load_hierarchy, HierarchyDocument, HierarchyError, HierarchyTree, RegionId, RegionSpec};
pub use ingest::{CleaningConfig, IngestError, LogFormat, Sample, SampleStore};
pub use model::{
    build_mobility_model, ClusterChoice, ClusterModel, MobilityModel, ModelConfig, ModelError, ThresholdChoice,
    TimeVector, TransitionMatrix,
};
pub use profiling::{Clustering, ElbowCurve, KMeansParams, ProfilingError};
pub use sessions::{Session, SessionEntry, SessionError, ThresholdSweepResult};
pub use synth::{GenerationConfig, InterArrival, SynthError, SyntheticTrace};
pub use validate::{RmseOptions, RmseReport, ValidateError};

use thiserror::Error;

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Input that breaks an invariant: bad hierarchy, bad matrix, bad script.
    Validation,
    /// Data that cannot be parsed or does not support the requested model.
    Data,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Profiling(#[from] ProfilingError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Adapt(#[from] AdaptError),
    #[error(transparent)]
    Validate(#[from] ValidateError),
}

fn profiling_kind(e: &ProfilingError) -> ErrorKind {
    match e {
        ProfilingError::ZeroK | ProfilingError::ElbowRange(_) => ErrorKind::Validation,
        _ => ErrorKind::Data,
    }
}

fn model_kind(e: &ModelError) -> ErrorKind {
    match e {
        ModelError::NoSessions | ModelError::ZeroDuration { .. } | ModelError::Json(_) => ErrorKind::Data,
        ModelError::Session(_) => ErrorKind::Validation,
        ModelError::Profiling(p) => profiling_kind(p),
        ModelError::Cluster { source, .. } => model_kind(source),
        _ => ErrorKind::Validation,
    }
}

impl ModelError {
    pub fn kind(&self) -> ErrorKind {
        model_kind(self)
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Ingest(IngestError::Io(_)) => ErrorKind::Io,
            Error::Ingest(_) => ErrorKind::Data,
            Error::Hierarchy(HierarchyError::Io { .. }) => ErrorKind::Io,
            Error::Hierarchy(HierarchyError::Json { .. }) => ErrorKind::Data,
            Error::Hierarchy(_) => ErrorKind::Validation,
            Error::Session(_) => ErrorKind::Validation,
            Error::Profiling(p) => profiling_kind(p),
            Error::Model(m) => model_kind(m),
            Error::Synth(_) | Error::Adapt(_) => ErrorKind::Validation,
            Error::Validate(ValidateError::Model(m)) => model_kind(m),
            Error::Validate(_) => ErrorKind::Validation,
        }
    }
}

//! Error type shared across the crate, with process exit codes for the CLI.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("degenerate weights: the weight vector sums to zero")]
    DegenerateWeights,

    #[error("divergence in epoch {epoch}, batch {batch}: {what} became non-finite")]
    Divergence {
        epoch: usize,
        batch: usize,
        what: &'static str,
    },

    #[error("model must be frozen before {0}")]
    NotFrozen(&'static str),

    #[error("model is already frozen; training would mutate fixed parameters")]
    AlreadyFrozen,

    #[error("frozen-model invariant violated: parameters changed during {0}")]
    FrozenParamsChanged(&'static str),

    #[error("unknown unit '{0}'")]
    UnknownUnit(String),

    #[error("empty probe set ({context}); lower alpha to admit weaker probes")]
    EmptyProbeSet { context: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("column '{0}' not found in CSV header")]
    MissingColumn(String),

    #[error("row {row}: cannot parse '{value}' in column {column} as a number")]
    UnparseableNumeric {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("row {row}: cannot parse label '{value}' as a non-negative integer")]
    LabelParse { row: usize, value: String },

    #[error("split fraction {index} ({fraction}) yields an empty split for {m} rows")]
    EmptySplit {
        index: usize,
        fraction: f64,
        m: usize,
    },

    #[error("theory check found {violations} violation(s): {context}")]
    TheoryViolation { violations: usize, context: String },

    #[error("missing artifact '{path}': run `{producer}` first")]
    MissingArtifact { path: String, producer: String },

    #[error("malformed artifact {path}: {reason}")]
    MalformedArtifact { path: String, reason: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Annotate an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: impl Into<String>) -> Error {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code used by the CLI.
    ///
    /// 0 success, 2 config error, 3 data error, 4 empty probe set,
    /// 5 divergence, 6 theory-check violation, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Config(_) | Error::InvalidSpec(_) => 2,
            Error::EmptyDataset
            | Error::MissingColumn(_)
            | Error::UnparseableNumeric { .. }
            | Error::LabelParse { .. }
            | Error::EmptySplit { .. }
            | Error::MissingArtifact { .. }
            | Error::MalformedArtifact { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 3,
            Error::EmptyProbeSet { .. } => 4,
            Error::Divergence { .. } => 5,
            Error::TheoryViolation { .. } => 6,
            _ => 1,
        }
    }
}

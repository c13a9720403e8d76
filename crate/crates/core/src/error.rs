use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by loading, discovery, network construction, inference and
/// evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("xml: {0}")]
    Xml(String),

    #[error("no labels declared")]
    NoLabels,
    #[error("label column `{0}` not found")]
    MissingLabelColumn(String),
    #[error("row {row}, column `{column}`: label value `{value}` is not 0 or 1")]
    NonBinaryLabel {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {message}")]
    Arff { line: usize, message: String },
    #[error("attribute `{name}` has unsupported type `{kind}`")]
    UnsupportedAttribute { name: String, kind: String },
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("empty label name")]
    EmptyName,
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("a label cannot be paired with itself (`{0}`)")]
    SameLabel(String),
    #[error("{0}")]
    Shape(String),

    #[error("fold count {folds} out of range for {instances} instances (need 2 <= folds <= instances)")]
    FoldCount { folds: usize, instances: usize },

    #[error("entailment cycle among non-equivalent labels: {}", .0.join(" -> "))]
    EntailmentCycle(Vec<String>),
    #[error("minimum support must be at least {min}, got {got}")]
    MinSupport { min: usize, got: usize },
    #[error("relationship cap must be at least 1")]
    ZeroCap,
    #[error("no minimum support up to {instances} satisfies the caps")]
    NoQualifyingSupport { instances: usize },
    #[error("exclusion mining exceeded its time budget")]
    MiningTimeout,

    #[error("missing prediction for node `{0}`")]
    MissingPrediction(String),
    #[error("{location}: probability {value} outside [0, 1]")]
    ProbabilityOutOfRange { location: String, value: f64 },
    #[error("unknown instance id `{0}`")]
    UnknownInstance(String),
    #[error("evidence is infeasible under the network constraints")]
    InfeasibleEvidence,
    #[error("network has {vars} free variables, enumeration limit is {limit}")]
    TooLarge { vars: usize, limit: usize },
    #[error("elimination would create a factor over {width} variables (limit {limit})")]
    TooComplex { width: usize, limit: usize },

    #[error("feature schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("no evaluable labels (every label lacks a relevant instance)")]
    NoEvaluableLabels,
    #[error("coverage mismatch: {0}")]
    CoverageMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("consistency check failed: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for internal invariant failures, as opposed to bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}

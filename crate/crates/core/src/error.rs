use crate::nodeset::NodeSet;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised while building, editing or generating structural models.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScmError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("intervention on {target} refers to missing edge from {parent}")]
    MissingEdge { target: String, parent: String },
    #[error("node X{0} does not exist")]
    NoSuchNode(usize),
    #[error("noise variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("continuous intervention evaluated without an environment value u")]
    MissingEnvironmentValue,
    #[error("predictor covariance for {set} is rank deficient (condition {condition:.3e})")]
    RankDeficient { set: NodeSet, condition: f64 },
    #[error("random model generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: String },
}

/// Errors raised by the statistical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("design is rank deficient (condition {condition:.3e})")]
    RankDeficient { condition: f64 },
    #[error("need more than {needed} observations, have {available}")]
    InsufficientData { needed: usize, available: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("environment {env} has {count} residuals; at least 3 are required")]
    SmallEnvironment { env: String, count: usize },
    #[error("at least two environments are required, found {0}")]
    TooFewEnvironments(usize),
    #[error("bandwidth {h} leaves point {index} (u = {u}) with {count} neighbours")]
    Bandwidth { index: usize, u: f64, h: f64, count: usize },
    #[error("local design at point {index} (u = {u}) is singular")]
    SingularLocalGram { index: usize, u: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Errors raised while reading panels from disk.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("row {row}, column {column:?}: cannot parse {value:?} as a number")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("discrete panels need at least two environments, found {0}")]
    SingleEnvironment(usize),
    #[error("schema must name exactly one of env_col or u_col")]
    Schema,
    #[error("panel is empty after dropping rows with missing values")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("no invariant matching candidate passed the cutoffs")]
    NoImpFound,
    #[error("every selected predictor was dropped on the test sample")]
    AllPredictorsDropped,
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

use thiserror::Error;

use crate::geometry::ManifoldId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tangent vector norm {norm} exceeds the injectivity guard {guard}")]
    Domain { norm: f64, guard: f64 },

    #[error("invalid tangent vector: {0}")]
    InvalidTangent(String),

    #[error("point is at or beyond the cut locus: {0}")]
    CutLocus(String),

    #[error("manifold mismatch: expected {expected}, got {got}")]
    ManifoldMismatch { expected: ManifoldId, got: ManifoldId },

    #[error("tangent vectors are based at different points")]
    BaseMismatch,

    #[error("coordinate length mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("point violates manifold membership: {0}")]
    NotOnManifold(String),

    #[error("covariates are all equal and cannot be scaled to [0, 1]")]
    DegenerateCovariates,

    #[error("privacy budgets must be positive (eps_p = {eps_p}, eps_v = {eps_v})")]
    NonpositiveBudget { eps_p: f64, eps_v: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed row {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("degenerate shape on row {line}: all landmarks coincide")]
    DegenerateShape { line: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Numeric failures come from the geometry itself rather than from malformed input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Domain { .. } | Error::CutLocus(_))
    }

    /// Errors caused by the caller's flags or configuration.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::Config(_) | Error::NonpositiveBudget { .. }
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::InvalidTangent(_) => "invalid_tangent",
            Error::CutLocus(_) => "cut_locus",
            Error::ManifoldMismatch { .. } => "manifold_mismatch",
            Error::BaseMismatch => "base_mismatch",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::DegenerateInput(_) => "degenerate_input",
            Error::NotOnManifold(_) => "not_on_manifold",
            Error::DegenerateCovariates => "degenerate_covariates",
            Error::NonpositiveBudget { .. } => "nonpositive_budget",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::MalformedRow { .. } => "malformed_row",
            Error::DegenerateShape { .. } => "degenerate_shape",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

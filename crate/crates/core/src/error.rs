use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("Hilbert space dimension {dim} exceeds cap {cap}")]
    DimensionOverflow { dim: usize, cap: usize },

    #[error("eigensolver did not converge for a {dim}x{dim} matrix within {max_iterations} sweeps (eps = {eps:e})")]
    EigenNonConvergence {
        dim: usize,
        max_iterations: usize,
        eps: f64,
    },

    #[error("decomposition check failed: {what} = {value:e} exceeds {tolerance:e}")]
    DecompositionCheck {
        what: &'static str,
        value: f64,
        tolerance: f64,
    },

    #[error("manifold classification ambiguous: {detail}")]
    ManifoldAmbiguity { detail: String },

    #[error("index {index} out of range for {what} of length {len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("normalization of final state {state} is not positive ({value:e})")]
    NonPositiveNorm { state: usize, value: f64 },

    #[error("final states f{} and f{} have linearly dependent response states (|M| = {overlap})", .first + 1, .second + 1)]
    DegenerateTargets { first: usize, second: usize, overlap: f64 },

    #[error("selective pencil has {positive} positive eigenvalues, expected exactly one")]
    InertiaViolation { positive: usize },

    #[error("frequency grid does not cover resonances: {}", .uncovered.join(", "))]
    GridCoverage { uncovered: Vec<String> },

    #[error("selectivity undefined: populations of states {a} and {b} are both zero")]
    UndefinedSelectivity { a: usize, b: usize },

    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Stable machine-readable identifier for error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::DimensionOverflow { .. } => "dimension_overflow",
            Error::EigenNonConvergence { .. } => "eigen_non_convergence",
            Error::DecompositionCheck { .. } => "decomposition_check",
            Error::ManifoldAmbiguity { .. } => "manifold_ambiguity",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::NonPositiveNorm { .. } => "non_positive_norm",
            Error::DegenerateTargets { .. } => "degenerate_targets",
            Error::InertiaViolation { .. } => "inertia_violation",
            Error::GridCoverage { .. } => "grid_coverage",
            Error::UndefinedSelectivity { .. } => "undefined_selectivity",
            Error::Config { .. } => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    /// Process exit code: 2 validation, 3 computation, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. } | Error::Config { .. } | Error::DimensionOverflow { .. } => 2,
            Error::Io { .. } => 4,
            Error::Json(e) if e.is_io() => 4,
            Error::Json(_) => 2,
            _ => 3,
        }
    }
}

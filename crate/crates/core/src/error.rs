use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad grouping of errors, used by front ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Metric,
    Solver,
    Internal,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("unbound variable `{0}`")]
    UnboundVariable(String),

    #[error("domain error in `{subexpr}`: {reason}")]
    Domain { subexpr: String, reason: String },

    #[error("degenerate metric: |det g| = {det:e} below threshold {threshold:e}")]
    DegenerateMetric { det: f64, threshold: f64 },

    #[error("signature mismatch: declared {declared}, found {negative} negative eigenvalue(s)")]
    SignatureMismatch { declared: String, negative: usize },

    #[error("metric is not symmetric: |g[{row}][{col}] - g[{col}][{row}]| = {deviation:e}")]
    AsymmetricMetric { row: usize, col: usize, deviation: f64 },

    #[error("coordinate `{coordinate}` = {value} outside open domain ({lo}, {hi})")]
    OutOfDomain { coordinate: String, value: f64, lo: f64, hi: f64 },

    #[error("finite-difference stencil for `{coordinate}` (step {step:e}) leaves the domain")]
    BoundaryProximity { coordinate: String, step: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{operation} is not defined for dimension {dim}")]
    UnsupportedDimension { operation: &'static str, dim: usize },

    #[error("degenerate plane: |G(u,v,u,v)| = {gram:e} below threshold {threshold:e}")]
    DegeneratePlane { gram: f64, threshold: f64 },

    #[error("M-eigen solver failed: {converged} of {starts} starts converged (best residual {best_residual:e})")]
    SolverFailure { starts: usize, converged: usize, best_residual: f64 },

    #[error("Ricci tensor is not diagonalizable over the reals: {defect}")]
    RicciNotDiagonalizable { defect: String },

    #[error("closed form requires Riemannian signature")]
    LorentzianClosedForm,

    #[error("sampled form is not of curvature type (relative residual {residual:e})")]
    NotCurvatureType { residual: f64 },

    #[error("internal error: sampling matrix rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("tensor violates the Kaehler identity R(JX,JY,Z,W) = R(X,Y,Z,W) by {violation:e}")]
    NotKaehler { violation: f64 },

    #[error("vector is not normalized: h(z,z) = {norm}")]
    Normalization { norm: f64 },

    #[error("Hermitian form is not positive definite")]
    NotPositiveDefinite,

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: String, message: String },

    #[error("metric file: {0}")]
    MetricFile(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            SolverFailure { .. } | RicciNotDiagonalizable { .. } => ErrorClass::Solver,
            RankDeficient { .. } => ErrorClass::Internal,
            InvalidArgument(_) => ErrorClass::Usage,
            _ => ErrorClass::Metric,
        }
    }

    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            Syntax { .. } => "syntax",
            UnknownIdentifier { .. } => "unknown_identifier",
            UnboundVariable(_) => "unbound_variable",
            Domain { .. } => "domain",
            DegenerateMetric { .. } => "degenerate_metric",
            SignatureMismatch { .. } => "signature_mismatch",
            AsymmetricMetric { .. } => "asymmetric_metric",
            OutOfDomain { .. } => "out_of_domain",
            BoundaryProximity { .. } => "boundary_proximity",
            DimensionMismatch { .. } => "dimension_mismatch",
            UnsupportedDimension { .. } => "unsupported_dimension",
            DegeneratePlane { .. } => "degenerate_plane",
            SolverFailure { .. } => "solver_failure",
            RicciNotDiagonalizable { .. } => "ricci_not_diagonalizable",
            LorentzianClosedForm => "lorentzian_closed_form",
            NotCurvatureType { .. } => "not_curvature_type",
            RankDeficient { .. } => "rank_deficient",
            NotKaehler { .. } => "not_kaehler",
            Normalization { .. } => "normalization",
            NotPositiveDefinite => "not_positive_definite",
            UnknownMetric(_) => "unknown_metric",
            InvalidParameter { .. } => "invalid_parameter",
            MetricFile(_) => "metric_file",
            InvalidArgument(_) => "invalid_argument",
        }
    }
}

use thiserror::Error;

/// Every failure the library reports. Numbers are carried as `f64` so the
/// error type does not depend on the scalar parameter.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension order violated: need n > 4s, got n = {n}, s = {s}")]
    DimensionOrderViolation { n: usize, s: f64 },
    #[error("exponent out of range: {what}")]
    ExponentRange { what: String },
    #[error("unsupported dimension n = {n} (allowed: {allowed})")]
    UnsupportedDimension { n: usize, allowed: &'static str },
    #[error("sublinear regime q = {q} <= {threshold} requires a nonnegative weight")]
    SublinearNeedsPositiveWeight { q: f64, threshold: f64 },
    #[error("weight has no bumps")]
    EmptyWeight,
    #[error("weight has no positive part (h_+ must not vanish identically)")]
    NoPositivePart,
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("normalization diverged: kappa(0) = {kappa0}, kappa(1) = {kappa1}")]
    NormalizationDiverged { kappa0: f64, kappa1: f64 },
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("bubble moment diverges: (n-2s)(q+1) = {exponent} <= n = {n}")]
    MomentDiverges { exponent: f64, n: usize },
    #[error("quadrature not converged: levels differ by {rel_diff:e} (relative)")]
    QuadratureNotConverged { rel_diff: f64 },
    #[error("ambiguous regime: {0}")]
    AmbiguousRegime(String),
    #[error("fit rejected: r2 = {r2} < {required}")]
    FitRejected { r2: f64, required: f64 },
    #[error("slab not certified: {0}")]
    SlabNotCertified(String),
    #[error("no interior critical point of kind {kind}")]
    NoInteriorCriticalPoint { kind: String },
    #[error("bordered solve stalled at relative residual {residual:e} after {iterations} iterations")]
    BorderedSolveStalled { residual: f64, iterations: usize },
    #[error("positivity lost: min of z+w on the support is {min_value}, threshold {threshold}")]
    PositivityLost { min_value: f64, threshold: f64 },
    #[error("Newton diverged: residual {residual:e} after {iterations} iterations")]
    NewtonDiverged { residual: f64, iterations: usize },
    #[error("no critical point of the requested kind {kind}")]
    NotRequestedKind { kind: String },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("insufficient levels: {found} nonzero levels, need {needed}")]
    InsufficientLevels { found: usize, needed: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

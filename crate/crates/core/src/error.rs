//! Error type shared across the crate.

use thiserror::Error;

/// All failure modes of the library.
///
/// Mathematical verdicts (cone non-membership, rejected projections,
/// signalling violations) are *not* errors; they are carried in certificates
/// and reports. Errors signal invalid inputs or numerical breakdown.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max |M - M*| entry = {asymmetry:.3e}")]
    NonHermitianInput { asymmetry: f64 },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("matrix entry ({row},{col}) lies outside the operator system (residual {residual:.3e})")]
    EntryNotInSystem { row: usize, col: usize, residual: f64 },

    #[error("element is not a positive contraction: lambda_min(p) = {lambda_min_p:.3e}, lambda_min(e-p) = {lambda_min_q:.3e}")]
    NonContraction { lambda_min_p: f64, lambda_min_q: f64 },

    #[error("element is not a projection: ||p^2 - p||_F = {defect:.3e}")]
    NotAProjection { defect: f64 },

    #[error("order norm of the contraction is {norm:.6} != 1; the quotient unit degenerates")]
    TrivialUnit { norm: f64 },

    #[error("rescaling is ill-conditioned: eigenvalue {value:.3e} is neither zero nor safely interior")]
    IllConditioned { value: f64 },

    #[error("empty family of maps")]
    EmptyFamily,

    #[error("degenerate projection family: every member is 0 or the unit")]
    DegenerateFamily,

    #[error("PVM elements do not commute: ||[E({x},{a}), F({y},{b})]||_F = {norm:.3e}")]
    CommutationViolation { x: usize, y: usize, a: usize, b: usize, norm: f64 },

    #[error("signalling violation: {party} marginal at {detail} differs by {magnitude:.3e}")]
    SignallingViolation { party: String, detail: String, magnitude: f64 },

    #[error("not a probability distribution: {reason}")]
    NotADistribution { reason: String },

    #[error("operators violate the non-signalling identities: {identity}")]
    NotNonSignalling { identity: String },

    #[error("invalid state: {reason}")]
    InvalidState { reason: String },

    #[error("schema error in {context}: {message}")]
    SchemaError { context: String, message: String },

    #[error("invariant violation: {which}")]
    InvariantViolation { which: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

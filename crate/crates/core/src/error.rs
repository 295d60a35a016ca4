use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has a non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("matrix is not Hermitian (max |M - M^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("trace is not 1 (got {trace})")]
    TraceNotOne { trace: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state is not normalized (squared norm {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("frequencies of terms {i} and {j} coincide; merge them before dephasing")]
    DegenerateFrequencies { i: usize, j: usize },

    #[error("integrand is not finite at t = {t}")]
    NonFiniteSample { t: f64 },

    #[error("post-selection overlap {overlap:e} is below the orthogonality threshold")]
    OrthogonalPostselection { overlap: f64 },

    #[error("quadrature node t = {t} lies on a zero of the post-selection overlap")]
    PoleOnPath { t: f64 },

    #[error("weak value has a pole at phase {phase}")]
    PoleAtPhase { phase: f64 },

    #[error("need at least {required} usable samples with distinct AB, got {found}")]
    InsufficientSamples { required: usize, found: usize },

    #[error("amplitude {amplitude:e} at x = {x} is too small to tailor a post-selection")]
    VanishingAmplitude { x: f64, amplitude: f64 },

    #[error("pointer shift {shift} exceeds a quarter of the grid span {span}")]
    GridOverflow { shift: f64, span: f64 },

    #[error("no trial survived post-selection")]
    NoSurvivors,

    #[error("quadrature and closed form disagree: {quadrature} vs {closed_form}")]
    RouteDisagreement { quadrature: f64, closed_form: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

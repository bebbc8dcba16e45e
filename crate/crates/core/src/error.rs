//! Error type shared by every module in the crate.
//!
//! Variants are grouped by the stage that produces them: input handling
//! (CSV/series construction), configuration validation, and analysis
//! (fitting, statistics, prediction). The CLI maps these groups onto its
//! exit codes, so keep new variants aligned with one of the groups.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    // ---- input / data errors -------------------------------------------

    /// CSV input could not be parsed. `line` is 1-based.
    #[error("csv parse error at line {line}: {message}")]
    CsvParse { line: usize, message: String },

    /// Timestamps in a CSV input are not strictly increasing.
    #[error("timestamps not strictly increasing at line {line}")]
    NonMonotonicTime { line: usize },

    /// Timestamps in a CSV input are not uniformly spaced.
    #[error("non-uniform sample spacing at line {line}: expected step {expected}, found {found}")]
    NonUniformSpacing {
        line: usize,
        expected: f64,
        found: f64,
    },

    /// Input held fewer samples than the operation needs.
    #[error("series too short: {needed} samples needed, {got} present")]
    TooShort { needed: usize, got: usize },

    /// A numeric value in the input is NaN or infinite.
    #[error("non-finite value in input: {context}")]
    NonFinite { context: String },

    /// A file could not be read or written.
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },

    // ---- configuration errors ------------------------------------------

    /// A parameter failed validation before any analysis ran.
    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: String, message: String },

    /// The requested resampling ratio is not supported.
    #[error("unsupported resample ratio: step {from} to {to} is neither an integer \
             downsample multiple nor an exact upsample divisor")]
    UnsupportedResampleRatio { from: f64, to: f64 },

    /// The series does not span enough time for the requested decomposition.
    #[error("series span {span} s is too short for decomposition (needs at least {needed} s)")]
    SpanTooShort { span: f64, needed: f64 },

    // ---- analysis errors -----------------------------------------------

    /// A fit seed lies outside the band it is supposed to describe.
    #[error("seed at t0 = {t0} lies outside the band span [{start}, {end}]")]
    SeedOutOfRange { t0: f64, start: f64, end: f64 },

    /// Peak detection produced no seeds, so there is nothing to fit.
    #[error("no peaks detected: {hint}")]
    EmptyModel { hint: String },

    /// Too few fitted states to compute interval statistics.
    #[error("insufficient states: {needed} needed, {got} available")]
    InsufficientStates { needed: usize, got: usize },

    /// A sample fed to an estimator was degenerate (all equal, zero variance).
    #[error("degenerate sample: {context}")]
    DegenerateSample { context: String },

    /// An argument fell outside a density's domain.
    #[error("domain error: {context}")]
    Domain { context: String },

    /// The early window held too few states to anchor a prediction.
    #[error("predictor unavailable: early window has {got} states, needs {needed}")]
    PredictorUnavailable { needed: usize, got: usize },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Coarse classification used by callers that need to bucket failures
    /// (the CLI turns these into exit codes).
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::CsvParse { .. }
            | Error::NonMonotonicTime { .. }
            | Error::NonUniformSpacing { .. }
            | Error::TooShort { .. }
            | Error::NonFinite { .. }
            | Error::Io { .. } => ErrorClass::Data,
            Error::InvalidParameter { .. }
            | Error::UnsupportedResampleRatio { .. }
            | Error::SpanTooShort { .. } => ErrorClass::Config,
            Error::SeedOutOfRange { .. }
            | Error::EmptyModel { .. }
            | Error::InsufficientStates { .. }
            | Error::DegenerateSample { .. }
            | Error::Domain { .. }
            | Error::PredictorUnavailable { .. } => ErrorClass::Analysis,
        }
    }
}

/// Failure bucket: what kind of problem stopped the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad flags or configuration values.
    Config,
    /// Unreadable or malformed input data.
    Data,
    /// The analysis itself could not proceed.
    Analysis,
}

impl ErrorClass {
    /// Stable lowercase token for machine-readable error lines.
    pub fn token(self) -> &'static str {
        match self {
            ErrorClass::Config => "config",
            ErrorClass::Data => "data",
            ErrorClass::Analysis => "analysis",
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} is off the surface (level set = {level:e})")]
    PointOffSurface { point: [f64; 3], level: f64 },
    #[error("vector is not tangent: |v.n| = {normal_component:e}")]
    NotTangent { normal_component: f64 },
    #[error("unknown catalog entry `{0}`")]
    UnknownCatalogName(String),
    #[error("iterated curl order {requested} exceeds the supported maximum {max}")]
    OrderTooHigh { requested: usize, max: usize },
    #[error("singular projection system for Fourier mode ({mx}, {my})")]
    SingularMode { mx: i64, my: i64 },
    #[error("slip length must be positive, got {0}")]
    NonpositiveSlipLength(f64),
    #[error("no curvature sign reproduces the classical condition (deviations: sigma=+1 {plus:e}, sigma=-1 {minus:e})")]
    NoConsistentSign { plus: f64, minus: f64 },
    #[error("base boundary condition violated: residual {residual:e} exceeds {tolerance:e}")]
    BaseConditionViolated { residual: f64, tolerance: f64 },
    #[error("precondition violated: {}", .0.join("; "))]
    PreconditionViolated(Vec<String>),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("CFL condition violated: CFL number {cfl:.4} > {limit}")]
    CflViolated { cfl: f64, limit: f64 },
    #[error("non-finite value detected at step {step}")]
    NaNDetected { step: usize },
    #[error("argument outside the domain of the formula: {0}")]
    DomainError(String),
    #[error("series has {0} points, at least 3 are needed")]
    SeriesTooShort(usize),
    #[error("fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("fit requires positive values, got {0}")]
    NonpositiveValue(f64),
    #[error("ladder run failed for nu = {nu}: {reason}")]
    LadderRunFailed { nu: f64, reason: String },
    #[error("line {line}: syntax error: {message}")]
    SyntaxError { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("key `{key}`: expected {expected}, found `{found}`")]
    TypeMismatch { key: String, expected: &'static str, found: String },
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("bad snapshot magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported snapshot version {0}")]
    VersionUnsupported(u32),
    #[error("snapshot payload truncated: expected {expected} values, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("I/O error on {path:?}: {source}")]
    Io {
        path: Option<PathBuf>,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: Some(path.into()), source }
    }

    /// Whether the failure is a validation problem (bad input) rather than a
    /// runtime failure. The CLI maps these to exit codes 1 and 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::UnknownCatalogName(_)
                | Error::NonpositiveSlipLength(_)
                | Error::PreconditionViolated(_)
                | Error::ConfigInvalid(_)
                | Error::CflViolated { .. }
                | Error::DomainError(_)
                | Error::SeriesTooShort(_)
                | Error::TooFewPoints(_)
                | Error::NonpositiveValue(_)
                | Error::SyntaxError { .. }
                | Error::UnknownKey { .. }
                | Error::TypeMismatch { .. }
                | Error::MissingKey(_)
                | Error::PointOffSurface { .. }
                | Error::NotTangent { .. }
                | Error::OrderTooHigh { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(source: std::io::Error) -> Self {
        Error::Io { path: None, source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

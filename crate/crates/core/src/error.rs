use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read config file {path}: {source}")]
    ConfigIo {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value`, got `{text}`")]
    ConfigSyntax { line: usize, text: String },
    #[error("config key `{key}`: unknown key")]
    UnknownKey { key: String },
    #[error("config key `{key}`: duplicate assignment")]
    DuplicateKey { key: String },
    #[error("config key `{key}`: cannot parse `{value}` ({reason})")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("config key `{key}` is required but missing")]
    MissingKey { key: String },
    #[error("config key `{key}`: {reason}")]
    InvariantViolation { key: String, reason: String },
    #[error("override `{text}`: expected `key=value`")]
    BadOverride { text: String },

    #[error("{name} must be positive (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("invalid angular-momentum pair l={l}, j={j}: j must be l ± 1/2 with j > 0")]
    BadAngularMomentum { l: u32, j: f64 },
    #[error("separation {r_m} m outside table range [{lo_m}, {hi_m}] m (no extrapolation)")]
    OutsideTable { r_m: f64, lo_m: f64, hi_m: f64 },
    #[error("blockade table invalid: {reason}")]
    BadTable { reason: String },

    #[error("quadrature did not converge (depth limit {max_depth} reached)")]
    QuadratureNonConvergence { max_depth: u32 },
    #[error("failed to bracket an interior minimum in [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },

    #[error("integration step {step} s too coarse for fastest scale {required} s")]
    StepTooCoarse { step: f64, required: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("measurement record has zero surviving shots")]
    NoSurvivingShots,
    #[error("envelope fit failed: {reason}")]
    FitFailure { reason: String },
    #[error("empty scan grid")]
    EmptyGrid,
}

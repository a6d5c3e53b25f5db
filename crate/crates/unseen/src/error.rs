//! Crate-wide error type.
//!
//! Variants are grouped by how a caller should react: construction and
//! validation failures, estimation failure modes that a harness may treat
//! as gaps, numeric guards, and data/IO problems. [`Error::exit_code`]
//! maps each group to the process exit code used by the CLI.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("duplicate multiplicity {0} in profile input")]
    DuplicateMultiplicity(u32),
    #[error("negative count {count} for multiplicity {multiplicity}")]
    NegativeCount { multiplicity: u32, count: i64 },
    #[error("multiplicity must be at least 1")]
    ZeroMultiplicity,
    #[error("horizon requires finite t > 0 and r > 0, got t = {t}, r = {r}")]
    InvalidHorizon { t: f64, r: f64 },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid smoothing distribution: {0}")]
    InvalidSmoothing(String),
    #[error("invalid confidence level {0}; need 0 < level < 1")]
    InvalidLevel(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("estimate undefined: {0}")]
    Undefined(String),
    #[error("Pade approximant degenerate: {0}")]
    PadeDegenerate(String),

    #[error("numeric guard: {0}")]
    NumericGuard(String),
    #[error("deviation z = {z} exceeds the admissible threshold {z_max}")]
    ThresholdExceeded { z: f64, z_max: f64 },
    #[error("tail bound is vacuous at level {level}: no admissible deviation attains it")]
    VacuousBound { level: f64 },

    #[error("empty corpus")]
    EmptyCorpus,
    #[error("line {line}: {msg}")]
    MalformedLine { line: usize, msg: String },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("bad stream file: {0}")]
    BadStreamFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit code class used by the command-line tool: 2 for data and IO
    /// problems, 3 for numeric guard rejections, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericGuard(_) | Error::ThresholdExceeded { .. } | Error::VacuousBound { .. } => 3,
            Error::EmptyCorpus
            | Error::MalformedLine { .. }
            | Error::InvalidSplit(_)
            | Error::BadStreamFile(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            _ => 1,
        }
    }
}

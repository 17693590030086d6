//! Crate-wide error type.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Structural problem in the road graph (self-loop, bad vertex id, ...).
    InvalidGraph(String),
    /// Two edges between the same vertex pair disagree on length.
    ConflictingEdge {
        u: usize,
        v: usize,
        first_m: u32,
        second_m: u32,
    },
    /// Vertex id referenced but not defined.
    UnknownVertex(usize),
    /// Malformed input file; `line` is 1-based where known.
    Parse {
        path: String,
        line: Option<u64>,
        msg: String,
    },
    /// A required CSV column is missing.
    MissingColumn { path: String, column: String },
    /// Discrete distribution is empty, negative, or does not sum to one.
    InvalidDistribution(String),
    /// Statistic undefined for the given data (zero variance, length mismatch, ...).
    DegenerateInput(String),
    /// Weighted draw over an all-zero weight vector.
    ZeroWeights(String),
    /// Logistic fit needs both classes present.
    SingleClass,
    /// OLS design matrix is rank deficient; names the offending column.
    RankDeficient { column: String },
    /// Deliverability filter left nothing to regress on.
    EmptyFilter,
    /// No tip in [0, max_tip] reaches the target latency.
    TipInfeasible { target_min: f64 },
    /// The latency model gives tip no effect at all (both tip coefficients zero).
    TipHasNoEffect,
    /// Scenario or annealing parameters out of range.
    InvalidConfig(String),
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGraph(msg) => write!(f, "invalid graph: {msg}"),
            Error::ConflictingEdge {
                u,
                v,
                first_m,
                second_m,
            } => write!(
                f,
                "duplicate edge {u}-{v} with conflicting lengths {first_m} m and {second_m} m"
            ),
            Error::UnknownVertex(id) => write!(f, "unknown vertex id {id}"),
            Error::Parse { path, line, msg } => match line {
                Some(n) => write!(f, "{path}:{n}: {msg}"),
                None => write!(f, "{path}: {msg}"),
            },
            Error::MissingColumn { path, column } => {
                write!(f, "{path}: missing required column '{column}'")
            }
            Error::InvalidDistribution(msg) => write!(f, "invalid distribution: {msg}"),
            Error::DegenerateInput(msg) => write!(f, "degenerate input: {msg}"),
            Error::ZeroWeights(msg) => write!(f, "all weights zero: {msg}"),
            Error::SingleClass => write!(f, "logistic fit requires both classes present"),
            Error::RankDeficient { column } => {
                write!(f, "design matrix is rank deficient at column '{column}'")
            }
            Error::EmptyFilter => write!(f, "deliverability filter kept no rows"),
            Error::TipInfeasible { target_min } => write!(
                f,
                "no tip in range reaches the target latency of {target_min} min"
            ),
            Error::TipHasNoEffect => {
                write!(f, "tip has no effect on predicted latency (zero coefficients)")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

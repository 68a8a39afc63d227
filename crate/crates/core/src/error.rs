use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes are incompatible for `op`.
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    /// `backward` was asked to start from a non-scalar node.
    NonScalarLoss { shape: Vec<usize> },
    /// A gradient contained NaN or infinity; the optimizer step was skipped.
    NonFiniteGradient { param: String },
    /// A score handed to the evaluator was NaN or infinite.
    NonFiniteScore { item: String },
    /// Fewer items are available in a segment than sampling requires.
    InsufficientItems {
        anchor: u64,
        available: usize,
        required: usize,
    },
    MissingEmbedding { kind: &'static str, key: String },
    MissingContext { anchor: u64 },
    NotAnAnchor { hour: u64 },
    /// A Pearson coefficient is undefined because a series is constant.
    ZeroVariance,
    SeriesTooShort { len: usize, required: usize },
    FusionMismatch { expected: &'static str },
    MismatchedTasks,
    InvalidConfig(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, left, right } => {
                write!(f, "{op}: shape mismatch {left:?} vs {right:?}")
            }
            Error::NonScalarLoss { shape } => {
                write!(f, "backward requires a scalar loss, got shape {shape:?}")
            }
            Error::NonFiniteGradient { param } => {
                write!(f, "non-finite gradient for parameter {param}")
            }
            Error::NonFiniteScore { item } => write!(f, "non-finite score for item {item}"),
            Error::InsufficientItems {
                anchor,
                available,
                required,
            } => write!(
                f,
                "segment anchored at hour {anchor} has {available} available items, {required} required"
            ),
            Error::MissingEmbedding { kind, key } => write!(f, "no {kind} embedding for {key:?}"),
            Error::MissingContext { anchor } => {
                write!(f, "no social context for anchor hour {anchor}")
            }
            Error::NotAnAnchor { hour } => write!(f, "hour {hour} is not a segment anchor"),
            Error::ZeroVariance => f.write_str("series has zero variance; correlation undefined"),
            Error::SeriesTooShort { len, required } => {
                write!(f, "series of length {len} is too short, need {required}")
            }
            Error::FusionMismatch { expected } => {
                write!(f, "prediction input does not match fusion mode, expected {expected}")
            }
            Error::MismatchedTasks => f.write_str("metric reports cover different task sets"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

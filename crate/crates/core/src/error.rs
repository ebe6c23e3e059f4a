use thiserror::Error;

use crate::grouped_data::Unit;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error classes, used by the CLI to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numeric,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("classes {index} and {next} are not contiguous ({upper} != {lower})", next = index + 1)]
    NonContiguousClasses { index: usize, upper: f64, lower: f64 },
    #[error("invalid class {index}: {reason}")]
    InvalidClass { index: usize, reason: String },
    #[error("{unit} frequencies sum to {sum}, expected 1000 (allowed rounding slack {slack})")]
    FrequencySumMismatch { unit: Unit, sum: f64, slack: f64 },
    #[error("class mean {mean} of class {index} lies outside [{lower}, {upper}]")]
    MeanOutsideClass {
        index: usize,
        mean: f64,
        lower: f64,
        upper: f64,
    },
    #[error("too few classes: found {found}, need at least {required}")]
    TooFewClasses { found: usize, required: usize },
    #[error("no deflator for round {0:?}")]
    MissingDeflator(String),
    #[error("invalid deflator series: {0}")]
    InvalidDeflator(String),
    #[error("invalid sector weights: {0}")]
    InvalidWeights(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("length mismatch: {left} observed vs {right} predicted")]
    LengthMismatch { left: usize, right: usize },
    #[error("predicted count {value} in class {index} is not positive")]
    DegeneratePrediction { index: usize, value: f64 },
    #[error("optimizer failed: {0}")]
    OptimizerFailure(String),
    #[error("sample lacks class means")]
    MissingClassMeans,
    #[error("singular regression: {0}")]
    SingularRegression(String),
    #[error("curve grids or scales differ")]
    GridMismatch,
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("distribution mean is undefined")]
    UndefinedMean,
    #[error("degenerate regression design: {0}")]
    DegenerateDesign(String),
    #[error("fit series mixes families: {0}")]
    MixedFamilies(String),
    #[error("invalid agent model configuration: {0}")]
    InvalidConfig(String),
    #[error("insufficient tail: {found} values above threshold, need {required}")]
    InsufficientTail { found: usize, required: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io(_) => ErrorKind::Io,
            Error::Csv(e) if e.is_io_error() => ErrorKind::Io,
            Error::MalformedRow { .. }
            | Error::NonContiguousClasses { .. }
            | Error::InvalidClass { .. }
            | Error::FrequencySumMismatch { .. }
            | Error::MeanOutsideClass { .. }
            | Error::TooFewClasses { .. }
            | Error::MissingDeflator(_)
            | Error::InvalidDeflator(_)
            | Error::InvalidWeights(_)
            | Error::InvalidArgument(_)
            | Error::MissingClassMeans
            | Error::MixedFamilies(_)
            | Error::InvalidConfig(_)
            | Error::Csv(_)
            | Error::Json(_) => ErrorKind::Input,
            Error::InvalidParams(_)
            | Error::LengthMismatch { .. }
            | Error::DegeneratePrediction { .. }
            | Error::OptimizerFailure(_)
            | Error::SingularRegression(_)
            | Error::GridMismatch
            | Error::DegenerateSample(_)
            | Error::UndefinedMean
            | Error::DegenerateDesign(_)
            | Error::InsufficientTail { .. } => ErrorKind::Numeric,
        }
    }
}

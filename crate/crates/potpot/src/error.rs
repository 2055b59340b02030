use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("zero matrix: all eigenvalues below tolerance")]
    ZeroMatrix,

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("vertical fit: abscissae are all equal")]
    VerticalFit,

    #[error("bandwidth {0} outside [1e-3, 1e3]")]
    BandwidthOutOfRange(f64),

    #[error("bandwidth list has length {got}, expected {expected}")]
    BandwidthCount { expected: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("class index {0} out of range (q = {1})")]
    ClassIndex(usize, usize),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("degenerate plot: all points identical")]
    DegeneratePlot,

    #[error("empty plot")]
    EmptyPlot,

    #[error("k_max {k_max} must be positive and smaller than the plot size {n}")]
    InvalidKMax { k_max: usize, n: usize },

    #[error("operation requires exactly two classes, got q = {0}")]
    NotBinary(usize),

    #[error("operation requires more than two classes, got q = {0}")]
    NotMulticlass(usize),

    #[error("all points lie at the origin")]
    AllAtOrigin,

    #[error("efficiency index undefined: reference error is zero while classifier error is positive")]
    UndefinedEfficiency,

    #[error("invalid generator parameter: {0}")]
    InvalidGenerator(String),

    #[error("csv parse error at line {line}: {msg}")]
    CsvParse { line: usize, msg: String },

    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

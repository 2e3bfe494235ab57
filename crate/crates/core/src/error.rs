use thiserror::Error;

/// Errors produced anywhere in the blending pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ragged lines: line {line} has width {found}, expected {expected}")]
    RaggedLines { line: usize, expected: usize, found: usize },
    #[error("unknown tile {ch:?} at line {line}, column {col}")]
    UnknownTile { ch: char, line: usize, col: usize },
    #[error("empty level text")]
    EmptyLevel,
    #[error("wrong dimensions: expected {expected}, found {found_height}x{found_width}")]
    WrongDimensions {
        expected: &'static str,
        found_height: usize,
        found_width: usize,
    },
    #[error("bad split ratios: {0}")]
    BadRatios(String),
    #[error("unknown game {0:?}")]
    UnknownGame(String),

    #[error("schema error: {0}")]
    Schema(String),
    #[error("duplicate tile {0:?}")]
    DuplicateTile(char),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("embedding dimension {dim} is smaller than tile count {tiles}")]
    DimTooSmall { dim: usize, tiles: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("non-finite loss at epoch {epoch} (recon {recon}, kl {kl})")]
    NonFiniteLoss { epoch: usize, recon: f64, kl: f64 },
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("checkpoint version mismatch: {0}")]
    VersionMismatch(String),
    #[error("corrupt checkpoint payload: {0}")]
    CorruptPayload(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("bad start cell ({row}, {col})")]
    BadStart { row: usize, col: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    InFile {
        path: String,
        #[source]
        source: Box<Error>,
    },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn in_file(path: impl Into<String>, source: Error) -> Self {
        Error::InFile {
            path: path.into(),
            source: Box::new(source),
        }
    }

    /// Innermost error, looking through file context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::InFile { source, .. } => source.root(),
            other => other,
        }
    }

    /// Short stable name of the variant, used in structured error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::RaggedLines { .. } => "RaggedLines",
            Error::UnknownTile { .. } => "UnknownTile",
            Error::EmptyLevel => "EmptyLevel",
            Error::WrongDimensions { .. } => "WrongDimensions",
            Error::BadRatios(_) => "BadRatios",
            Error::UnknownGame(_) => "UnknownGame",
            Error::Schema(_) => "SchemaError",
            Error::DuplicateTile(_) => "DuplicateTile",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::DimTooSmall { .. } => "DimTooSmall",
            Error::NonFinite(_) => "NonFinite",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::EmptyTrainSet => "EmptyTrainSet",
            Error::VersionMismatch(_) => "VersionMismatch",
            Error::CorruptPayload(_) => "CorruptPayload",
            Error::EmptyInput(_) => "EmptyInput",
            Error::BadStart { .. } => "BadStart",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::InFile { source, .. } => source.kind(),
            Error::Io { .. } => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
            Error::Image(_) => "Image",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

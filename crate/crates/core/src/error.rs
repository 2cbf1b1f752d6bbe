use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read image {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(PathBuf),

    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    #[error("no images found under {0}")]
    EmptyDataset(PathBuf),

    #[error("dataset contains only label {present} ({count} images)")]
    MissingClass { present: u8, count: usize },

    #[error("region {width}x{height} is smaller than the 3x3 minimum")]
    RegionTooSmall { width: usize, height: usize },

    #[error("region ({x0},{y0}) {width}x{height} is not inside a {image_width}x{image_height} image")]
    RegionOutOfBounds { x0: usize, y0: usize, width: usize, height: usize, image_width: usize, image_height: usize },

    #[error("LBP window {window} does not fit in a {width}x{height} region")]
    WindowLargerThanRegion { window: usize, width: usize, height: usize },

    #[error("image {width}x{height} is too small for a {grid}x{grid} grid")]
    ImageTooSmall { width: usize, height: usize, grid: usize },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("all training labels are {0}; both classes are required")]
    DegenerateLabels(u8),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite feature value at row {row}, column {column}")]
    NonFiniteFeature { row: usize, column: usize },

    #[error("class {label} has {count} samples, fewer than k = {k}")]
    TooFewSamples { label: u8, count: usize, k: usize },

    #[error("ROC-AUC needs both classes; only label {0} present")]
    SingleClass(u8),

    #[error("model expects features `{expected}` but `{found}` was requested")]
    ConfigMismatch { expected: String, found: String },

    #[error("malformed model: {0}")]
    ModelFormat(String),

    #[error("malformed feature CSV: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// Process exit code: 2 for input and contract errors, 1 for internal failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io(_) | Error::Internal(_) => 1,
            _ => 2,
        }
    }
}

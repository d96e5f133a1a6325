use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    // decoding
    #[error("malformed image header: {0}")]
    MalformedHeader(String),
    #[error("truncated image payload: {0}")]
    TruncatedPayload(String),
    #[error("unsupported bit depth or color format: {0}")]
    UnsupportedFormat(String),
    #[error("png encoding failed: {0}")]
    Encode(String),

    // shapes and arguments
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("kernel taps must have odd length, got {0}")]
    EvenTaps(usize),
    #[error("image {width}x{height} too small: {what}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        what: &'static str,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    // numerics
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },
    #[error("zero diagonal entry at index {0}")]
    ZeroDiagonal(usize),
    #[error("all pairwise distances are zero")]
    DegenerateDistances,
    #[error("training set has a single class")]
    SingleClass,
    #[error("invalid label {0}, expected +1 or -1")]
    InvalidLabel(f64),
    #[error("all kernel weights vanished after projection")]
    VanishingWeights,
    #[error("gating saturated repeatedly (max logit {0:.1})")]
    GatingSaturation(f64),
    #[error("lmkl model requires a gating representation for the query")]
    MissingGating,

    // features and data
    #[error("feature group `{0}` not present")]
    MissingGroup(String),
    #[error("duplicate feature group `{0}`")]
    DuplicateGroup(String),
    #[error("feature configuration enables no groups")]
    EmptyFeatureConfig,
    #[error("channel count mismatch: expected {expected}, found {actual}")]
    ChannelCountMismatch { expected: usize, actual: usize },
    #[error("empty fixation list")]
    EmptyFixations,
    #[error("sampling region too small: {0}")]
    RegionTooSmall(String),
    #[error("empty dataset at {0}")]
    EmptyDataset(PathBuf),
    #[error("fixation file {path}: {message}")]
    Fixations { path: PathBuf, message: String },
    #[error("n_train = {n_train} out of range for dataset of size {size}")]
    SplitRange { n_train: usize, size: usize },
    #[error("auc undefined: {0}")]
    AucUndefined(&'static str),

    // files
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("corrupt {format} data: {message}")]
    Corrupt {
        format: &'static str,
        message: String,
    },
    #[error("experiment failed: {failed} of {total} seeds failed")]
    ExperimentFailed { failed: usize, total: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

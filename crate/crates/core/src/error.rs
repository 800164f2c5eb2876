use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} out of range: {detail}")]
    Bounds { what: &'static str, detail: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("degenerate latent code (zero norm)")]
    DegenerateCode,

    #[error("degenerate bounding box: {0}")]
    DegenerateBbox(String),

    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },

    #[error("singular camera intrinsics")]
    SingularIntrinsics,

    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("codebook format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("unsupported codebook version {0}")]
    UnsupportedVersion(u32),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("empty geometry: {0}")]
    EmptyGeometry(String),

    #[error("view {index} has an empty silhouette")]
    EmptySilhouette { index: usize },

    #[error("degenerate view: ground-truth silhouette is empty")]
    DegenerateView,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("insufficient data: need {needed}, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error("no overlap between model and scene")]
    NoOverlap,

    #[error("insufficient overlap at iteration {iteration}: {count} correspondences")]
    InsufficientOverlap { iteration: usize, count: usize },

    #[error("degenerate geometry: singular normal equations")]
    DegenerateGeometry,

    #[error("training diverged at iteration {iteration}")]
    TrainingDiverged { iteration: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("missing depth image: {0}")]
    MissingDepth(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(String),
}

impl Error {
    pub(crate) fn bounds(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Bounds {
            what,
            detail: detail.into(),
        }
    }

    /// True for errors caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::TrainingDiverged { .. } | Error::DegenerateGeometry | Error::InsufficientOverlap { .. }
        )
    }
}

use thiserror::Error;

/// Errors produced by the geometry, tiling and evaluation routines.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("pixel ({u:.3}, {v:.3}) lies outside the image circle")]
    OutOfCircle { u: f64, v: f64 },
    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),
    #[error("degenerate box: {0}")]
    DegenerateBox(String),
    #[error("degenerate scene: {0}")]
    DegenerateScene(String),
    #[error("foot ray at incident angle {theta_deg:.4} deg does not reach the ground plane")]
    Horizon { theta_deg: f64 },
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    /// Stable identifier used in machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::OutOfCircle { .. } => "out-of-circle",
            Error::UnsupportedConfiguration(_) => "unsupported-configuration",
            Error::DegenerateBox(_) => "degenerate-box",
            Error::DegenerateScene(_) => "division-by-zero",
            Error::Horizon { .. } => "horizon",
            Error::Configuration(_) => "configuration",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Image(_) => "image",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

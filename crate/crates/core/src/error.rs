use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, MvsError>;

#[derive(Debug, Error)]
pub enum MvsError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("invalid depth range [{d_min}, {d_max}]: require 0 < d_min < d_max")]
    InvalidDepthRange { d_min: f64, d_max: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("point is behind the camera (camera-frame depth {0})")]
    BehindCamera(f64),

    #[error("reference and source frusta never overlap")]
    NoOverlap,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: byte offset {offset}: {message}")]
    Binary {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("missing {what} for view {view}: {path}")]
    MissingFile {
        what: &'static str,
        view: usize,
        path: PathBuf,
    },

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl MvsError {
    /// Short machine-readable tag used by the command-line error line.
    pub fn kind(&self) -> &'static str {
        match self {
            MvsError::InvalidCamera(_) => "invalid_camera",
            MvsError::InvalidDepthRange { .. } => "invalid_depth_range",
            MvsError::InvalidArgument(_) => "invalid_argument",
            MvsError::ShapeMismatch(_) => "shape_mismatch",
            MvsError::InvalidDistribution(_) => "invalid_distribution",
            MvsError::BehindCamera(_) => "behind_camera",
            MvsError::NoOverlap => "no_overlap",
            MvsError::Parse { .. } => "parse",
            MvsError::Binary { .. } => "binary_format",
            MvsError::MissingFile { .. } => "missing_file",
            MvsError::Image(_) => "image",
            MvsError::Json(_) => "json",
            MvsError::Io(_) => "io",
        }
    }
}

pub(crate) fn invalid_arg(msg: impl Into<String>) -> MvsError {
    MvsError::InvalidArgument(msg.into())
}

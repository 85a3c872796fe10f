use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sampling plan: {0}")]
    InvalidPlan(String),

    #[error("frame index {index} out of range for {n_frames} frames")]
    FrameOutOfRange { index: usize, n_frames: usize },

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("mask dimensions differ: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: u32,
        left_h: u32,
        right_w: u32,
        right_h: u32,
    },

    #[error("no evaluable frames (all ground-truth masks absent)")]
    NoEvaluableFrames,

    #[error("segment/class mismatch: {0}")]
    RunMismatch(String),

    #[error("missing prediction for sampled frame {0}")]
    MissingPrediction(usize),

    #[error("missing ground truth for frame {0}")]
    MissingGroundTruth(usize),

    #[error("ground truth is sparse: first missing frame is {first_gap}; streaming evaluation needs dense annotation")]
    SparseGroundTruth { first_gap: usize },

    #[error("invalid palette: {0}")]
    InvalidPalette(String),

    #[error("invalid manifest {path}: {reason}")]
    InvalidManifest { path: PathBuf, reason: String },

    #[error("manifest references missing files: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingFiles(Vec<PathBuf>),

    #[error("invalid scene spec: {0}")]
    InvalidScene(String),

    #[error("invalid predictor job: {0}")]
    InvalidJob(String),

    #[error("external predictor failed: {0}")]
    External(String),

    #[error("external predictor timed out after {0:?}")]
    ExternalTimeout(std::time::Duration),

    #[error("external predictor output missing mask for frame {index}: {path}")]
    MissingOutputMask { index: usize, path: PathBuf },

    #[error("external predictor output for frame {index} is invalid: {reason}")]
    BadOutputMask { index: usize, reason: String },

    #[error("report error: {0}")]
    Report(String),

    #[error("incomplete result grid; missing cells: {}", .0.join(", "))]
    IncompleteGrid(Vec<String>),

    #[error("survey: {0}")]
    Survey(#[from] crate::survey::SurveyError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the navigation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid depth {0}: planar depth must be positive and finite")]
    InvalidDepth(f64),

    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("pose ({x:.3}, {y:.3}) lies outside the scene bounds")]
    OutOfBounds { x: f64, y: f64 },

    #[error("no navigable cell within {radius:.2} m of ({x:.3}, {y:.3})")]
    SnapFailure { x: f64, y: f64, radius: f64 },

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("mask dimensions {got_w}x{got_h} do not match expected {want_w}x{want_h}")]
    DimensionMismatch {
        want_w: u32,
        want_h: u32,
        got_w: u32,
        got_h: u32,
    },

    #[error("path {global_id} references pixels outside view {view}")]
    ForeignPath { global_id: u32, view: String },

    #[error("path references unknown candidate id {id} in view {view}")]
    DanglingId { id: u32, view: String },

    #[error("no JSON object found in model reply")]
    NoJson,

    #[error("malformed model reply: {0}")]
    BadReply(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("endpoint error: {0}")]
    Endpoint(String),

    #[error("evaluation error for episode {episode}: {reason}")]
    Evaluation { episode: String, reason: String },

    #[error("setup error: {0}")]
    Setup(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

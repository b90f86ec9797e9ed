//! Viola-Jones style face detection: Haar-like features evaluated on
//! integral images, AdaBoost-trained stages arranged as an attentional
//! cascade, and a multi-scale sliding-window scan.

mod boost;
mod cascade;
mod format;
mod haar;

pub use boost::{
    boost_rounds, train_cascade, train_stage, train_weak, BoostRound, StageSpec, StumpFit,
};
pub use cascade::{
    classify_window, classify_window_counted, detect, Cascade, FaceBox, ScanConfig, Stage,
    WeakClassifier,
};
pub use format::{load_cascade, save_cascade};
pub use haar::{eval_feature, feature_pool, FeatureKind, HaarFeature};

use crate::imaging::Rect;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("window {rect:?} at scale {scale} exceeds the {width}x{height} image")]
    OutOfBounds {
        rect: Rect,
        scale: f64,
        width: usize,
        height: usize,
    },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("feature pool is empty")]
    NoFeatures,
    #[error("image {width}x{height} is smaller than the {base_w}x{base_h} detection window")]
    ImageTooSmall {
        width: usize,
        height: usize,
        base_w: usize,
        base_h: usize,
    },
    #[error("invalid label {0}, expected +1 or -1")]
    InvalidLabel(i8),
    #[error("invalid cascade: {0}")]
    Invalid(String),
    #[error("cascade parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported cascade format {0:?}")]
    VersionMismatch(String),
    #[error(transparent)]
    Imaging(#[from] crate::imaging::ImagingError),
}

pub type Result<T, E = DetectorError> = std::result::Result<T, E>;

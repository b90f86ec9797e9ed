//! End-to-end orchestration: synthetic data, manifests, configuration,
//! pipeline training and inference, evaluation and the detector fixture.

mod config;
mod fixture;
mod manifest;
mod metrics;
mod pipeline;
mod synth;

pub use config::{DetectorMode, NoFacePolicy, PipelineConfig};
pub use fixture::{
    detector_samples, evaluate_detector, matches_face, train_detector, DetectorFixture,
    DetectorScore,
};
pub use manifest::{ingest, load_frames, parse_manifest, write_manifest, ManifestRecord};
pub use metrics::{
    evaluate, onset_latency, predict_dataset, FoldMetrics, LatencyStats, MetricsReport,
};
pub use pipeline::{
    fit_pipeline, infer_stream, load_pipeline, save_pipeline, Extractor, FitOutcome, PipelineModel,
    StreamResult, TrainingSettings,
};
pub use synth::{
    render_frame, synth_frames, synth_generate, FaceMode, LightLevel, SynthFrame, SyntheticSpec,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::classifier::{ClassLabel, ClassifierError};
use crate::detector::DetectorError;
use crate::fatigue::FatigueError;
use crate::features::FeaturesError;
use crate::imaging::{Image, ImagingError, Rect};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: bad label {value:?} (expected +1 or -1)")]
    BadLabel { line: usize, value: String },
    #[error("manifest line {line}: {message}")]
    BadRecord { line: usize, message: String },
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("manifest has no records")]
    EmptyManifest,
    #[error("config: {0}")]
    Config(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("dataset contains a single class")]
    SingleClass,
    #[error("no face found in any frame")]
    NoFacesFound,
    #[error("too few samples: {0}")]
    TooFewSamples(String),
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("pipeline file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported pipeline format {0:?}")]
    VersionMismatch(String),
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: ImagingError,
    },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Features(#[from] FeaturesError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Fatigue(#[from] FatigueError),
}

impl HarnessError {
    /// True for errors caused by a model file rather than by input data.
    pub fn is_model_error(&self) -> bool {
        matches!(
            self,
            HarnessError::ModelMismatch(_)
                | HarnessError::Parse { .. }
                | HarnessError::VersionMismatch(_)
                | HarnessError::Detector(DetectorError::Parse { .. })
                | HarnessError::Detector(DetectorError::VersionMismatch(_))
                | HarnessError::Features(FeaturesError::Parse { .. })
                | HarnessError::Features(FeaturesError::VersionMismatch(_))
                | HarnessError::Classifier(ClassifierError::Parse { .. })
                | HarnessError::Classifier(ClassifierError::VersionMismatch(_))
                | HarnessError::Classifier(ClassifierError::DimensionMismatch { .. })
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

/// One camera frame, optionally with a known face box.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub image: Image,
    pub face: Option<Rect>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrame {
    pub frame: Frame,
    pub label: ClassLabel,
    /// Subject tag used to keep a subject's frames in one fold.
    pub group: Option<String>,
}

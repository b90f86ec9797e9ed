//! Face normalisation, eye/mouth regions of interest, feature vectors and
//! PCA compression.

mod eigen;
mod format;
mod pca;
mod roi;

pub use eigen::{jacobi_eigen, SymmetricEigen};
pub use format::{load_pca, save_pca};
pub use pca::{pca_fit, pca_project, pca_reconstruct, ComponentSpec, PcaModel};
pub use roi::{assemble, extract_rois, normalize_face, FeatureVector, RoiGeometry};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeaturesError {
    #[error("expected a {expected_w}x{expected_h} image, got {got_w}x{got_h}")]
    WrongDimensions {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("vector length {got} does not match expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("all samples are identical; there is no variance to model")]
    DegenerateData,
    #[error("invalid component count: {0}")]
    BadK(String),
    #[error("PCA needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("PCA model parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported PCA model format {0:?}")]
    VersionMismatch(String),
    #[error(transparent)]
    Imaging(#[from] crate::imaging::ImagingError),
}

pub type Result<T, E = FeaturesError> = std::result::Result<T, E>;

//! Soft-margin SVM trained with sequential minimal optimisation, plus
//! seeded k-fold cross-validation.

mod cv;
mod format;
mod smo;

pub use cv::{
    cross_validate, cross_validate_with_folds, grouped_folds, stratified_folds, Confusion,
    CvReport, FoldRecord,
};
pub use format::{load_svm, save_svm};
pub use smo::{svm_train, svm_train_report, SmoReport, SvmParams};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error("training data contains a single class")]
    SingleClass,
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("vector length {got} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("too few samples: {0}")]
    TooFewSamples(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("SVM model parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported SVM model format {0:?}")]
    VersionMismatch(String),
}

pub type Result<T, E = ClassifierError> = std::result::Result<T, E>;

/// Classifier output: +1 means fatigued, -1 means alert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassLabel {
    Alert,
    Fatigued,
}

impl ClassLabel {
    pub fn value(self) -> i64 {
        match self {
            ClassLabel::Fatigued => 1,
            ClassLabel::Alert => -1,
        }
    }

    pub fn sign(self) -> f64 {
        self.value() as f64
    }

    pub fn from_value(v: i64) -> Option<Self> {
        match v {
            1 => Some(ClassLabel::Fatigued),
            -1 => Some(ClassLabel::Alert),
            _ => None,
        }
    }
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClassLabel::Fatigued => "+1",
            ClassLabel::Alert => "-1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(ClassifierError::InvalidParameter(format!(
                    "rbf gamma must be positive, got {gamma}"
                )))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => u.iter().zip(v).map(|(a, b)| a * b).sum(),
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = u
                    .iter()
                    .zip(v)
                    .map(|(a, b)| {
                        let d = a - b;
                        d * d
                    })
                    .sum();
                (-gamma * d2).exp()
            }
        }
    }

    /// RBF kernel with `gamma = 1 / (k * var(X))`, the variance taken over all entries.
    pub fn rbf_scaled<S: AsRef<[f64]>>(x: &[S]) -> Self {
        let k = x.first().map_or(1, |r| r.as_ref().len()).max(1);
        let count = (x.len() * k) as f64;
        let var = if count > 0.0 {
            let mean = x.iter().flat_map(|r| r.as_ref()).sum::<f64>() / count;
            x.iter()
                .flat_map(|r| r.as_ref())
                .map(|v| (v - mean) * (v - mean))
                .sum::<f64>()
                / count
        } else {
            0.0
        };
        let gamma = if var > 0.0 {
            1.0 / (k as f64 * var)
        } else {
            1.0
        };
        KernelSpec::Rbf { gamma }
    }
}

/// Trained SVM in dual form.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
    pub c: f64,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }
}

/// `sum_i dual_coef_i * K(sv_i, x) + b`.
pub fn svm_decision(model: &SvmModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.dim() {
        return Err(ClassifierError::DimensionMismatch {
            expected: model.dim(),
            got: x.len(),
        });
    }
    Ok(model
        .support_vectors
        .iter()
        .zip(&model.dual_coef)
        .map(|(sv, c)| c * model.kernel.eval(sv, x))
        .sum::<f64>()
        + model.bias)
}

/// Sign of the decision value; an exact zero counts as fatigued.
pub fn svm_predict(model: &SvmModel, x: &[f64]) -> Result<ClassLabel> {
    Ok(label_for_decision(svm_decision(model, x)?))
}

pub fn label_for_decision(decision: f64) -> ClassLabel {
    if decision >= 0.0 {
        ClassLabel::Fatigued
    } else {
        ClassLabel::Alert
    }
}

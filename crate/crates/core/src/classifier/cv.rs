use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::smo::{svm_train, SvmParams};
use super::{svm_predict, ClassLabel, ClassifierError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, truth: ClassLabel, predicted: ClassLabel) {
        match (truth, predicted) {
            (ClassLabel::Fatigued, ClassLabel::Fatigued) => self.tp += 1,
            (ClassLabel::Alert, ClassLabel::Fatigued) => self.fp += 1,
            (ClassLabel::Alert, ClassLabel::Alert) => self.tn += 1,
            (ClassLabel::Fatigued, ClassLabel::Alert) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| (self.tp + self.tn) as f64 / n as f64)
    }

    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldRecord {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: Vec<FoldRecord>,
    pub mean_accuracy: f64,
    pub confusion: Confusion,
    /// Out-of-fold prediction for every sample, in input order.
    pub predictions: Vec<ClassLabel>,
    /// Fold index of every sample.
    pub assignment: Vec<usize>,
}

impl CvReport {
    pub fn fold_accuracies(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.accuracy).collect()
    }
}

fn check_folds(labels: &[ClassLabel], folds: usize) -> Result<()> {
    if folds < 2 {
        return Err(ClassifierError::InvalidParameter(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if labels.len() < folds {
        return Err(ClassifierError::TooFewSamples(format!(
            "{} samples cannot fill {folds} folds",
            labels.len()
        )));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(ClassifierError::SingleClass);
    }
    Ok(())
}

/// Seeded stratified assignment. Each class is shuffled and dealt
/// round-robin, continuing the rotation across classes, so fold sizes
/// differ by at most one both overall and per class.
pub fn stratified_folds(labels: &[ClassLabel], folds: usize, seed: u64) -> Result<Vec<usize>> {
    check_folds(labels, folds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut counter = 0;
    for class in [ClassLabel::Alert, ClassLabel::Fatigued] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            assignment[i] = counter % folds;
            counter += 1;
        }
    }
    Ok(assignment)
}

/// Seeded group-aware assignment: every group lands in exactly one fold.
/// Groups are visited in shuffled order, largest first, each going to the
/// fold with the fewest samples (then fewest fatigued samples).
pub fn grouped_folds(
    labels: &[ClassLabel],
    groups: &[String],
    folds: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    check_folds(labels, folds)?;
    if groups.len() != labels.len() {
        return Err(ClassifierError::InvalidParameter(format!(
            "{} group tags for {} samples",
            groups.len(),
            labels.len()
        )));
    }
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        members.entry(g.as_str()).or_default().push(i);
    }
    if members.len() < folds {
        return Err(ClassifierError::TooFewSamples(format!(
            "{} groups cannot fill {folds} folds",
            members.len()
        )));
    }
    let mut order: Vec<Vec<usize>> = members.into_values().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order.sort_by_key(|m| std::cmp::Reverse(m.len()));

    let mut size = vec![0usize; folds];
    let mut positives = vec![0usize; folds];
    let mut assignment = vec![0; labels.len()];
    for m in order {
        let f = (0..folds)
            .min_by_key(|&f| (size[f], positives[f], f))
            .expect("folds >= 2");
        size[f] += m.len();
        for i in m {
            assignment[i] = f;
            if labels[i] == ClassLabel::Fatigued {
                positives[f] += 1;
            }
        }
    }
    Ok(assignment)
}

/// Stratified k-fold cross-validation with a seeded shuffle.
pub fn cross_validate<S: AsRef<[f64]> + Sync>(
    x: &[S],
    y: &[ClassLabel],
    folds: usize,
    params: &SvmParams,
    seed: u64,
) -> Result<CvReport> {
    if x.len() != y.len() {
        return Err(ClassifierError::InvalidParameter(format!(
            "{} samples but {} labels",
            x.len(),
            y.len()
        )));
    }
    let assignment = stratified_folds(y, folds, seed)?;
    cross_validate_with_folds(x, y, &assignment, params)
}

/// Cross-validation over an explicit fold assignment.
pub fn cross_validate_with_folds<S: AsRef<[f64]> + Sync>(
    x: &[S],
    y: &[ClassLabel],
    assignment: &[usize],
    params: &SvmParams,
) -> Result<CvReport> {
    if x.len() != y.len() || assignment.len() != y.len() {
        return Err(ClassifierError::InvalidParameter(
            "samples, labels and fold assignment differ in length".into(),
        ));
    }
    let n_folds = assignment.iter().max().map_or(0, |m| m + 1);
    let mut predictions = vec![ClassLabel::Alert; y.len()];
    let mut confusion = Confusion::default();
    let mut records = Vec::with_capacity(n_folds);
    for fold in 0..n_folds {
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..y.len()).partition(|&i| assignment[i] == fold);
        if test.is_empty() {
            continue;
        }
        debug_assert!(train.iter().all(|i| assignment[*i] != fold));
        let tx: Vec<&[f64]> = train.iter().map(|&i| x[i].as_ref()).collect();
        let ty: Vec<ClassLabel> = train.iter().map(|&i| y[i]).collect();
        let model = svm_train(&tx, &ty, params)?;
        let mut correct = 0;
        for &i in &test {
            let p = svm_predict(&model, x[i].as_ref())?;
            predictions[i] = p;
            confusion.record(y[i], p);
            if p == y[i] {
                correct += 1;
            }
        }
        records.push(FoldRecord {
            accuracy: correct as f64 / test.len() as f64,
            train,
            test,
        });
    }
    let mean_accuracy = records.iter().map(|r| r.accuracy).sum::<f64>() / records.len() as f64;
    Ok(CvReport {
        folds: records,
        mean_accuracy,
        confusion,
        predictions,
        assignment: assignment.to_vec(),
    })
}

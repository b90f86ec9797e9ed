use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::NoFacePolicy;
use super::pipeline::{fit_features, PipelineModel};
use super::{HarnessError, LabeledFrame, Result};
use crate::classifier::{
    grouped_folds, label_for_decision, stratified_folds, ClassLabel, ClassifierError, Confusion,
};
use crate::fatigue::{simulate, ActuatorKind, AlertConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct FoldMetrics {
    pub accuracy: f64,
    /// Frame indices used for training.
    pub train: Vec<usize>,
    /// Frame indices held out.
    pub test: Vec<usize>,
}

/// Detection latency over simulated fatigue onsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub onsets: usize,
    /// Onsets that raised an alarm within the observation window.
    pub detected: usize,
    /// Mean ticks from onset to AlarmOn, counting the onset tick as 1.
    pub mean_ticks: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Frames that contributed a prediction.
    pub n: usize,
    pub skipped: usize,
    pub confusion: Confusion,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub folds: Vec<FoldMetrics>,
    pub mean_fold_accuracy: Option<f64>,
    pub latency: Option<LatencyStats>,
}

impl MetricsReport {
    fn from_confusion(confusion: Confusion, skipped: usize) -> Self {
        Self {
            n: confusion.total(),
            skipped,
            confusion,
            accuracy: confusion.accuracy(),
            precision: confusion.precision(),
            recall: confusion.recall(),
            folds: Vec::new(),
            mean_fold_accuracy: None,
            latency: None,
        }
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
        let c = &self.confusion;
        let mut out = String::new();
        writeln!(out, "frames     {} (skipped {})", self.n, self.skipped).unwrap();
        writeln!(out, "accuracy   {}", opt(self.accuracy)).unwrap();
        writeln!(out, "precision  {}", opt(self.precision)).unwrap();
        writeln!(out, "recall     {}", opt(self.recall)).unwrap();
        writeln!(
            out,
            "confusion  TP={} FP={} TN={} FN={}",
            c.tp, c.fp, c.tn, c.fn_
        )
        .unwrap();
        for (i, f) in self.folds.iter().enumerate() {
            writeln!(
                out,
                "fold {i}     {:.4} ({} test)",
                f.accuracy,
                f.test.len()
            )
            .unwrap();
        }
        if !self.folds.is_empty() {
            writeln!(out, "fold mean  {}", opt(self.mean_fold_accuracy)).unwrap();
        }
        if let Some(l) = self.latency {
            writeln!(
                out,
                "latency    {} ticks ({}/{} onsets alarmed)",
                opt(l.mean_ticks),
                l.detected,
                l.onsets
            )
            .unwrap();
        }
        out
    }
}

/// Scores a trained model on labelled frames.
pub fn predict_dataset(
    model: &PipelineModel,
    frames: &[LabeledFrame],
    policy: NoFacePolicy,
) -> Result<MetricsReport> {
    model.check()?;
    let preds: Vec<Option<ClassLabel>> = frames
        .par_iter()
        .map(|f| match model.extractor.extract(&f.frame)? {
            Some(v) => Ok(Some(label_for_decision(model.decision(&v)?))),
            None => Ok(match policy {
                NoFacePolicy::Skip => None,
                NoFacePolicy::TreatAsFatigued => Some(ClassLabel::Fatigued),
            }),
        })
        .collect::<Result<_>>()?;
    let mut confusion = Confusion::default();
    let mut skipped = 0;
    for (f, p) in frames.iter().zip(&preds) {
        match p {
            Some(p) => confusion.record(f.label, *p),
            None => skipped += 1,
        }
    }
    Ok(MetricsReport::from_confusion(confusion, skipped))
}

/// Cross-validated evaluation with the model's extractor and training
/// settings. PCA and SVM are refitted on each training fold, so no test
/// frame influences the model that scores it. When every frame carries a
/// group tag, whole groups are assigned to folds.
pub fn evaluate(
    model: &PipelineModel,
    frames: &[LabeledFrame],
    folds: usize,
    seed: u64,
    alert: &AlertConfig,
) -> Result<MetricsReport> {
    let extracted = model
        .extractor
        .extract_all(frames.par_iter().map(|f| &f.frame))?;
    let used: Vec<usize> = (0..frames.len())
        .filter(|&i| extracted[i].is_some())
        .collect();
    let skipped = frames.len() - used.len();
    if used.is_empty() {
        return Err(HarnessError::NoFacesFound);
    }
    let labels: Vec<ClassLabel> = used.iter().map(|&i| frames[i].label).collect();
    let groups: Option<Vec<String>> = used.iter().map(|&i| frames[i].group.clone()).collect();
    let assignment = match &groups {
        Some(g) => grouped_folds(&labels, g, folds, seed),
        None => stratified_folds(&labels, folds, seed),
    }
    .map_err(|e| match e {
        ClassifierError::TooFewSamples(m) => HarnessError::TooFewSamples(m),
        ClassifierError::SingleClass => HarnessError::SingleClass,
        other => other.into(),
    })?;

    let fold_results: Vec<(FoldMetrics, Vec<(usize, ClassLabel)>)> = (0..folds)
        .into_par_iter()
        .map(|fold| -> Result<_> {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..used.len()).partition(|&k| assignment[k] == fold);
            assert!(
                train.iter().all(|k| assignment[*k] != fold),
                "training fold overlaps test fold"
            );
            let tx: Vec<&[f64]> = train
                .iter()
                .map(|&k| {
                    extracted[used[k]]
                        .as_deref()
                        .expect("used frames have features")
                })
                .collect();
            let ty: Vec<ClassLabel> = train.iter().map(|&k| labels[k]).collect();
            let (pca, svm) = fit_features(&tx, &ty, &model.training)?;
            let fold_model = PipelineModel {
                extractor: model.extractor.clone(),
                training: model.training,
                pca,
                svm,
            };
            let mut preds = Vec::with_capacity(test.len());
            let mut correct = 0;
            for &k in &test {
                let v = extracted[used[k]]
                    .as_deref()
                    .expect("used frames have features");
                let p = label_for_decision(fold_model.decision(v)?);
                correct += (p == labels[k]) as usize;
                preds.push((k, p));
            }
            Ok((
                FoldMetrics {
                    accuracy: if test.is_empty() {
                        0.0
                    } else {
                        correct as f64 / test.len() as f64
                    },
                    train: train.iter().map(|&k| used[k]).collect(),
                    test: test.iter().map(|&k| used[k]).collect(),
                },
                preds,
            ))
        })
        .collect::<Result<_>>()?;

    let mut confusion = Confusion::default();
    let mut oof = vec![ClassLabel::Alert; used.len()];
    let mut fold_metrics = Vec::with_capacity(folds);
    for (fm, preds) in fold_results {
        for (k, p) in preds {
            confusion.record(labels[k], p);
            oof[k] = p;
        }
        fold_metrics.push(fm);
    }
    let mut report = MetricsReport::from_confusion(confusion, skipped);
    report.mean_fold_accuracy =
        Some(fold_metrics.iter().map(|f| f.accuracy).sum::<f64>() / fold_metrics.len() as f64);
    report.folds = fold_metrics;
    report.latency = onset_latency(&labels, &oof, alert, 20, seed)?;
    Ok(report)
}

/// Simulates `onsets` streams of 20 alert frames followed by fatigued
/// frames, drawing each tick's classifier output from the out-of-fold
/// predictions of the matching class, and measures ticks to AlarmOn.
/// Returns None when either class has no predictions.
pub fn onset_latency(
    truth: &[ClassLabel],
    predicted: &[ClassLabel],
    alert: &AlertConfig,
    onsets: usize,
    seed: u64,
) -> Result<Option<LatencyStats>> {
    let pool = |c: ClassLabel| -> Vec<ClassLabel> {
        truth
            .iter()
            .zip(predicted)
            .filter(|(t, _)| **t == c)
            .map(|(_, p)| *p)
            .collect()
    };
    let (alert_pool, fatigued_pool) = (pool(ClassLabel::Alert), pool(ClassLabel::Fatigued));
    if alert_pool.is_empty() || fatigued_pool.is_empty() || onsets == 0 {
        return Ok(None);
    }
    const LEAD: usize = 20;
    let window = 4 * alert.t_high as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0usize;
    let mut detected = 0usize;
    for _ in 0..onsets {
        let mut stream = Vec::with_capacity(LEAD + window);
        for i in 0..LEAD + window {
            let pool = if i < LEAD {
                &alert_pool
            } else {
                &fatigued_pool
            };
            stream.push(pool[rng.random_range(0..pool.len())]);
        }
        let trace = simulate(&stream, alert)?;
        let onset_t = LEAD as f64 * alert.sample_period;
        let first = trace
            .events
            .iter()
            .find(|e| e.kind == ActuatorKind::AlarmOn && e.t > onset_t + 1e-9);
        if let Some(e) = first {
            detected += 1;
            total += ((e.t - onset_t) / alert.sample_period).round() as usize;
        }
    }
    Ok(Some(LatencyStats {
        onsets,
        detected,
        mean_ticks: (detected > 0).then(|| total as f64 / detected as f64),
    }))
}

//! Decision stumps and discrete AdaBoost for cascade stages.

use rayon::prelude::*;

use super::cascade::{Cascade, Stage, WeakClassifier};
use super::haar::{HaarFeature, Window};
use super::{DetectorError, Result};
use crate::imaging::IntegralImage;

const EPS_CLAMP: f64 = 1e-10;

/// Result of fitting a one-feature threshold classifier.
///
/// A sample is predicted positive when `polarity * value >= polarity * threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StumpFit {
    pub threshold: f64,
    pub polarity: i8,
    pub error: f64,
}

impl StumpFit {
    #[inline]
    pub fn predicts_positive(&self, value: f64) -> bool {
        stump_fires(value, self.threshold, self.polarity)
    }
}

#[inline]
pub(crate) fn stump_fires(value: f64, threshold: f64, polarity: i8) -> bool {
    if polarity > 0 {
        value >= threshold
    } else {
        value <= threshold
    }
}

fn check_labels(labels: &[i8]) -> Result<()> {
    match labels.iter().find(|&&l| l != 1 && l != -1) {
        Some(&bad) => Err(DetectorError::InvalidLabel(bad)),
        None => Ok(()),
    }
}

/// Minimum weighted-error stump over midpoints between consecutive distinct
/// values plus the two infinite sentinels. Ties go to the smaller threshold,
/// then to polarity +1.
pub fn train_weak(values: &[f64], labels: &[i8], weights: &[f64]) -> Result<StumpFit> {
    if values.is_empty() {
        return Err(DetectorError::EmptyInput("no samples for stump"));
    }
    if values.len() != labels.len() || values.len() != weights.len() {
        return Err(DetectorError::Invalid(format!(
            "length mismatch: {} values, {} labels, {} weights",
            values.len(),
            labels.len(),
            weights.len()
        )));
    }
    check_labels(labels)?;
    if weights.iter().any(|&w| !(w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(DetectorError::Invalid(
            "weights must be non-negative with a positive sum".into(),
        ));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    Ok(scan_sorted(values, labels, weights, &mut order))
}

/// Core threshold scan. `order` is scratch space of length `values.len()`.
fn scan_sorted(values: &[f64], labels: &[i8], weights: &[f64], order: &mut [usize]) -> StumpFit {
    for (i, o) in order.iter_mut().enumerate() {
        *o = i;
    }
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));

    let (mut pos_total, mut neg_total) = (0.0, 0.0);
    for (&l, &w) in labels.iter().zip(weights) {
        if l > 0 {
            pos_total += w;
        } else {
            neg_total += w;
        }
    }

    // Weight of positives / negatives strictly below the current cut.
    let (mut pos_below, mut neg_below) = (0.0, 0.0);
    let mut best = StumpFit {
        threshold: f64::NEG_INFINITY,
        polarity: 1,
        error: f64::INFINITY,
    };
    let n = order.len();
    for k in 0..=n {
        if k > 0 {
            let i = order[k - 1];
            if labels[i] > 0 {
                pos_below += weights[i];
            } else {
                neg_below += weights[i];
            }
        }
        let threshold = if k == 0 {
            f64::NEG_INFINITY
        } else if k == n {
            f64::INFINITY
        } else {
            let (lo, hi) = (values[order[k - 1]], values[order[k]]);
            if lo == hi {
                continue;
            }
            lo + (hi - lo) / 2.0
        };
        // polarity +1: everything at or above the cut is positive
        let err_pos = pos_below + (neg_total - neg_below);
        // polarity -1: everything below the cut is positive
        let err_neg = neg_below + (pos_total - pos_below);
        if err_pos < best.error {
            best = StumpFit {
                threshold,
                polarity: 1,
                error: err_pos,
            };
        }
        if err_neg < best.error {
            best = StumpFit {
                threshold,
                polarity: -1,
                error: err_neg,
            };
        }
    }
    best
}

/// One round of boosting, kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostRound {
    pub feature: usize,
    pub stump: StumpFit,
    pub alpha: f64,
    pub beta: f64,
    /// Normalised weights the stump was fitted against.
    pub weights: Vec<f64>,
}

/// Discrete AdaBoost over an abstract feature table.
///
/// `fill(f, out)` writes the value of feature `f` for every sample into
/// `out`. Initial weights are `1/(2P)` for positives and `1/(2N)` for
/// negatives.
pub fn boost_rounds<F>(
    n_features: usize,
    labels: &[i8],
    rounds: usize,
    fill: F,
) -> Result<Vec<BoostRound>>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    if n_features == 0 {
        return Err(DetectorError::NoFeatures);
    }
    check_labels(labels)?;
    let n_pos = labels.iter().filter(|&&l| l > 0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(DetectorError::EmptyInput(
            "boosting needs positive and negative samples",
        ));
    }
    if rounds == 0 {
        return Err(DetectorError::Invalid("rounds must be at least 1".into()));
    }
    let mut weights: Vec<f64> = labels
        .iter()
        .map(|&l| {
            if l > 0 {
                0.5 / n_pos as f64
            } else {
                0.5 / n_neg as f64
            }
        })
        .collect();

    let n = labels.len();
    let mut history = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);

        let w_ref = &weights;
        let (feature, stump) = (0..n_features)
            .into_par_iter()
            .map_init(
                || (vec![0.0; n], vec![0usize; n]),
                |(values, order), f| {
                    fill(f, values);
                    (f, scan_sorted(values, labels, w_ref, order))
                },
            )
            .reduce_with(|a, b| {
                if b.1.error < a.1.error || (b.1.error == a.1.error && b.0 < a.0) {
                    b
                } else {
                    a
                }
            })
            .expect("at least one feature");

        let eps = stump.error.clamp(EPS_CLAMP, 1.0 - EPS_CLAMP);
        let beta = eps / (1.0 - eps);
        let alpha = (1.0 / beta).ln();

        let mut values = vec![0.0; n];
        fill(feature, &mut values);
        let fitted = weights.clone();
        for ((w, &v), &l) in weights.iter_mut().zip(&values).zip(labels) {
            if stump.predicts_positive(v) == (l > 0) {
                *w *= beta;
            }
        }
        history.push(BoostRound {
            feature,
            stump,
            alpha,
            beta,
            weights: fitted,
        });
    }
    Ok(history)
}

/// Boosting schedule for one cascade stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSpec {
    pub rounds: usize,
    pub target_detection_rate: f64,
}

fn sample_windows(samples: &[IntegralImage], base: (usize, usize)) -> Result<Vec<Window>> {
    samples
        .iter()
        .map(|ii| Window::new(ii, (0, 0), 1.0, base))
        .collect()
}

/// Trains one AdaBoost stage on base-size windows, then lowers the stage
/// threshold from half the total vote until at least
/// `target_detection_rate` of the positives pass.
pub fn train_stage(
    positives: &[IntegralImage],
    negatives: &[IntegralImage],
    pool: &[HaarFeature],
    base: (usize, usize),
    rounds: usize,
    target_detection_rate: f64,
) -> Result<Stage> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(DetectorError::EmptyInput(
            "stage needs positives and negatives",
        ));
    }
    if pool.is_empty() {
        return Err(DetectorError::NoFeatures);
    }
    if !(0.0..=1.0).contains(&target_detection_rate) {
        return Err(DetectorError::Invalid(format!(
            "target detection rate {target_detection_rate} outside [0, 1]"
        )));
    }
    if let Some(f) = pool.iter().find(|f| !f.fits(base.0, base.1)) {
        return Err(DetectorError::Invalid(format!(
            "feature {f:?} exceeds the base window"
        )));
    }
    let samples: Vec<&IntegralImage> = positives.iter().chain(negatives).collect();
    let windows = sample_windows(positives, base)?
        .into_iter()
        .chain(sample_windows(negatives, base)?)
        .collect::<Vec<_>>();
    let labels: Vec<i8> = std::iter::repeat_n(1, positives.len())
        .chain(std::iter::repeat_n(-1, negatives.len()))
        .collect();

    let history = boost_rounds(pool.len(), &labels, rounds, |f, out| {
        for ((slot, win), ii) in out.iter_mut().zip(&windows).zip(&samples) {
            *slot = win.eval(ii, &pool[f]);
        }
    })?;

    let weak: Vec<(WeakClassifier, f64)> = history
        .iter()
        .map(|r| {
            (
                WeakClassifier {
                    feature: pool[r.feature],
                    threshold: r.stump.threshold,
                    polarity: r.stump.polarity,
                },
                r.alpha,
            )
        })
        .collect();
    let half_vote = 0.5 * weak.iter().map(|(_, a)| a).sum::<f64>();
    let mut stage = Stage::new(weak, half_vote)?;

    let mut scores: Vec<f64> = positives
        .iter()
        .zip(&windows)
        .map(|(ii, win)| stage.score(ii, win))
        .collect();
    scores.sort_by(f64::total_cmp);
    let required = ((target_detection_rate * scores.len() as f64) - 1e-9).ceil() as usize;
    if required > 0 {
        let passing = scores.len() - scores.partition_point(|&s| s < stage.threshold);
        if passing < required {
            stage.threshold = scores[scores.len() - required];
        }
    }
    Ok(stage)
}

/// Trains stages in sequence; each later stage only sees the negatives that
/// every earlier stage still accepts. Stops early once no negatives survive.
pub fn train_cascade(
    positives: &[IntegralImage],
    negatives: &[IntegralImage],
    pool: &[HaarFeature],
    base: (usize, usize),
    specs: &[StageSpec],
) -> Result<Cascade> {
    if specs.is_empty() {
        return Err(DetectorError::Invalid(
            "at least one stage spec required".into(),
        ));
    }
    let mut stages: Vec<Stage> = Vec::with_capacity(specs.len());
    let mut remaining: Vec<IntegralImage> = negatives.to_vec();
    for (i, spec) in specs.iter().enumerate() {
        if remaining.is_empty() {
            log::info!("no negatives left after {i} stages; stopping early");
            break;
        }
        let stage = train_stage(
            positives,
            &remaining,
            pool,
            base,
            spec.rounds,
            spec.target_detection_rate,
        )?;
        remaining.retain(|ii| {
            let win = Window::new(ii, (0, 0), 1.0, base).expect("checked in train_stage");
            stage.passes(ii, &win)
        });
        log::info!(
            "stage {}: {} weak classifiers, {} negatives still accepted",
            i + 1,
            stage.weak.len(),
            remaining.len()
        );
        stages.push(stage);
    }
    Cascade::new(base.0, base.1, stages)
}

use fatigue_core::detector::{
    boost_rounds, classify_window, classify_window_counted, detect, eval_feature, feature_pool,
    load_cascade, save_cascade, train_stage, train_weak, Cascade, DetectorError, FeatureKind,
    HaarFeature, ScanConfig, Stage, WeakClassifier,
};
use fatigue_core::imaging::{integral_image, Image, IntegralImage, Rect};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn weighted_error(values: &[f64], labels: &[i8], weights: &[f64], thr: f64, pol: i8) -> f64 {
    values
        .iter()
        .zip(labels)
        .zip(weights)
        .filter(|((&v, &l), _)| {
            let fires = if pol > 0 { v >= thr } else { v <= thr };
            fires != (l > 0)
        })
        .map(|(_, w)| w)
        .sum()
}

/// Every midpoint between distinct sorted values plus both infinities,
/// with both polarities.
fn exhaustive_stump_error(values: &[f64], labels: &[i8], weights: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut cuts = vec![f64::NEG_INFINITY, f64::INFINITY];
    cuts.extend(sorted.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    let mut best = f64::INFINITY;
    for &t in &cuts {
        for pol in [1, -1] {
            best = best.min(weighted_error(values, labels, weights, t, pol));
        }
    }
    best
}

#[test]
fn stump_search_matches_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for _ in 0..200 {
        let n = rng.random_range(1..=20);
        // coarse values so ties happen
        let values: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..8) as f64 * 0.5)
            .collect();
        let labels: Vec<i8> = (0..n).map(|_| if rng.random() { 1 } else { -1 }).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let fit = train_weak(&values, &labels, &weights).unwrap();
        let oracle = exhaustive_stump_error(&values, &labels, &weights);
        assert!(
            (fit.error - oracle).abs() < 1e-12,
            "{} vs {oracle}",
            fit.error
        );
        let achieved = weighted_error(&values, &labels, &weights, fit.threshold, fit.polarity);
        assert!((achieved - fit.error).abs() < 1e-12);
    }
}

#[test]
fn stump_rejects_bad_input() {
    assert!(matches!(
        train_weak(&[], &[], &[]),
        Err(DetectorError::EmptyInput(_))
    ));
    assert!(matches!(
        train_weak(&[1.0], &[2], &[1.0]),
        Err(DetectorError::InvalidLabel(2))
    ));
}

/// Hand-executed discrete AdaBoost over a small table of feature values.
fn reference_boost(
    table: &[Vec<f64>],
    labels: &[i8],
    rounds: usize,
) -> Vec<(usize, f64, Vec<f64>)> {
    let n_pos = labels.iter().filter(|&&l| l > 0).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let mut w: Vec<f64> = labels
        .iter()
        .map(|&l| if l > 0 { 0.5 / n_pos } else { 0.5 / n_neg })
        .collect();
    let mut out = Vec::new();
    for _ in 0..rounds {
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        let errs: Vec<f64> = table
            .iter()
            .map(|vals| exhaustive_stump_error(vals, labels, &w))
            .collect();
        let f = (0..table.len())
            .min_by(|&a, &b| errs[a].total_cmp(&errs[b]))
            .unwrap();
        let fit = train_weak(&table[f], labels, &w).unwrap();
        let eps = errs[f].clamp(1e-10, 1.0 - 1e-10);
        let beta = eps / (1.0 - eps);
        out.push((f, (1.0 / beta).ln(), w.clone()));
        for i in 0..labels.len() {
            if fit.predicts_positive(table[f][i]) == (labels[i] > 0) {
                w[i] *= beta;
            }
        }
    }
    out
}

#[test]
fn boosting_matches_hand_run() {
    let labels = [1, 1, 1, -1, -1, -1];
    let table = vec![
        vec![0.9, 0.8, 0.2, 0.3, 0.1, 0.05],
        vec![0.1, 0.7, 0.9, 0.2, 0.6, 0.3],
        vec![0.5, 0.4, 0.6, 0.45, 0.55, 0.35],
    ];
    let fill = |f: usize, out: &mut [f64]| out.copy_from_slice(&table[f]);
    let ours = boost_rounds(table.len(), &labels, 2, fill).unwrap();
    let reference = reference_boost(&table, &labels, 2);
    for (r, (f, alpha, w)) in ours.iter().zip(&reference) {
        assert_eq!(r.feature, *f);
        assert!((r.alpha - alpha).abs() < 1e-12);
        for (a, b) in r.weights.iter().zip(w) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

#[test]
fn boosting_error_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for _ in 0..20 {
        let n = 30;
        let labels: Vec<i8> = (0..n).map(|i| if i % 3 == 0 { 1 } else { -1 }).collect();
        let table: Vec<Vec<f64>> = (0..6)
            .map(|_| {
                labels
                    .iter()
                    .map(|&l| l as f64 * 0.3 + rng.random_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        let fill = |f: usize, out: &mut [f64]| out.copy_from_slice(&table[f]);
        let t = rng.random_range(1..8);
        let rounds = boost_rounds(table.len(), &labels, t, fill).unwrap();
        let bound: f64 = rounds
            .iter()
            .map(|r| 2.0 * (r.stump.error * (1.0 - r.stump.error)).sqrt())
            .product();
        let half: f64 = rounds.iter().map(|r| r.alpha).sum::<f64>() / 2.0;
        let d1 = &rounds[0].weights;
        let mut err = 0.0;
        for i in 0..n {
            let score: f64 = rounds
                .iter()
                .filter(|r| r.stump.predicts_positive(table[r.feature][i]))
                .map(|r| r.alpha)
                .sum();
            if (score >= half) != (labels[i] > 0) {
                err += d1[i];
            }
        }
        assert!(err <= bound + 1e-12, "error {err} above bound {bound}");
    }
}

fn textured(rng: &mut impl Rng, face: bool) -> IntegralImage {
    let img = Image::from_fn(24, 24, |x, y| {
        let base = if face && (6..18).contains(&x) && (8..12).contains(&y) {
            40
        } else {
            150
        };
        (base as f64 + rng.random_range(-30.0..30.0f64)) as u8
    });
    integral_image(&img).unwrap()
}

#[test]
fn single_round_on_separable_data_is_one_perfect_stump() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let pos: Vec<_> = (0..20).map(|_| textured(&mut rng, true)).collect();
    let neg: Vec<_> = (0..20).map(|_| textured(&mut rng, false)).collect();
    let pool = feature_pool(24, 24, 4);
    let stage = train_stage(&pos, &neg, &pool, (24, 24), 1, 1.0).unwrap();
    assert_eq!(stage.weak.len(), 1);
    let eps: f64 = 1e-10;
    assert!((stage.weak[0].1 - ((1.0 - eps) / eps).ln()).abs() < 1e-9);
    let cascade = Cascade::new(24, 24, vec![stage]).unwrap();
    for ii in &pos {
        assert!(classify_window(ii, &cascade, (0, 0), 1.0).unwrap());
    }
    for ii in &neg {
        assert!(!classify_window(ii, &cascade, (0, 0), 1.0).unwrap());
    }
}

#[test]
fn full_detection_target_keeps_every_training_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    // overlapping classes: the threshold has to be lowered
    let pos: Vec<_> = (0..30).map(|i| textured(&mut rng, i % 3 != 0)).collect();
    let neg: Vec<_> = (0..30).map(|i| textured(&mut rng, i % 5 == 0)).collect();
    let pool = feature_pool(24, 24, 6);
    let stage = train_stage(&pos, &neg, &pool, (24, 24), 3, 1.0).unwrap();
    assert!(stage.weak.iter().all(|(_, a)| *a >= 0.0));
    let cascade = Cascade::new(24, 24, vec![stage]).unwrap();
    for ii in &pos {
        assert!(classify_window(ii, &cascade, (0, 0), 1.0).unwrap());
    }
}

fn stump(kind: FeatureKind, rect: Rect, threshold: f64, polarity: i8) -> WeakClassifier {
    WeakClassifier {
        feature: HaarFeature::new(kind, rect).unwrap(),
        threshold,
        polarity,
    }
}

#[test]
fn rejection_short_circuits() {
    let pass = Stage::new(
        vec![(
            stump(FeatureKind::TwoHorizontal, Rect::new(0, 0, 24, 24), -1e9, 1),
            1.0,
        )],
        0.5,
    )
    .unwrap();
    let fail = Stage::new(
        vec![(
            stump(FeatureKind::TwoVertical, Rect::new(0, 0, 24, 24), 1e9, 1),
            1.0,
        )],
        0.5,
    )
    .unwrap();
    let ii = integral_image(&Image::filled(24, 24, 100)).unwrap();
    let cascade = Cascade::new(24, 24, vec![fail.clone(), pass.clone(), pass.clone()]).unwrap();
    assert_eq!(
        classify_window_counted(&ii, &cascade, (0, 0), 1.0).unwrap(),
        (false, 1)
    );
    let cascade = Cascade::new(24, 24, vec![pass.clone(), pass.clone(), fail]).unwrap();
    assert_eq!(
        classify_window_counted(&ii, &cascade, (0, 0), 1.0).unwrap(),
        (false, 3)
    );
    let cascade = Cascade::new(24, 24, vec![pass]).unwrap();
    assert_eq!(
        classify_window_counted(&ii, &cascade, (0, 0), 1.0).unwrap(),
        (true, 1)
    );
    assert!(Cascade::new(24, 24, vec![]).is_err());
}

#[test]
fn blank_frames_have_no_faces() {
    let selective = Stage::new(
        vec![(
            stump(FeatureKind::TwoHorizontal, Rect::new(0, 0, 24, 12), 0.1, 1),
            1.0,
        )],
        1.0,
    )
    .unwrap();
    let cascade = Cascade::new(24, 24, vec![selective]).unwrap();
    for v in [0, 128, 255] {
        assert!(
            detect(&Image::filled(120, 90, v), &cascade, &ScanConfig::default())
                .unwrap()
                .is_empty()
        );
    }
    assert!(matches!(
        detect(&Image::filled(20, 30, 0), &cascade, &ScanConfig::default()),
        Err(DetectorError::ImageTooSmall { .. })
    ));
}

#[test]
fn constant_windows_give_zero_for_every_feature() {
    let pool = feature_pool(24, 24, 2);
    assert!(pool.len() > 10_000);
    for v in [0u8, 77, 255] {
        let ii = integral_image(&Image::filled(80, 80, v)).unwrap();
        for f in pool.iter().step_by(7) {
            for (origin, scale) in [((0, 0), 1.0), ((5, 9), 1.6), ((10, 3), 2.25)] {
                assert_eq!(eval_feature(&ii, f, origin, scale, (24, 24)).unwrap(), 0.0);
            }
        }
    }
}

fn arb_cascade() -> impl Strategy<Value = Cascade> {
    let pool = feature_pool(24, 24, 2);
    let weak = (0..pool.len(), -5.0f64..5.0, any::<bool>(), 0.0f64..10.0).prop_map(
        move |(f, threshold, pos, alpha)| {
            (
                WeakClassifier {
                    feature: pool[f],
                    threshold,
                    polarity: if pos { 1 } else { -1 },
                },
                alpha,
            )
        },
    );
    let stage = (proptest::collection::vec(weak, 1..6), -20.0f64..20.0)
        .prop_map(|(weak, threshold)| Stage::new(weak, threshold).unwrap());
    proptest::collection::vec(stage, 1..4).prop_map(|stages| Cascade::new(24, 24, stages).unwrap())
}

proptest! {
    #[test]
    fn cascade_codec_round_trip(c in arb_cascade()) {
        let back = load_cascade(&save_cascade(&c)).unwrap();
        prop_assert_eq!(&back, &c);
        for (a, b) in back.stages.iter().zip(&c.stages) {
            prop_assert_eq!(a.threshold.to_bits(), b.threshold.to_bits());
            for ((wa, aa), (wb, ab)) in a.weak.iter().zip(&b.weak) {
                prop_assert_eq!(wa.threshold.to_bits(), wb.threshold.to_bits());
                prop_assert_eq!(aa.to_bits(), ab.to_bits());
            }
        }
    }

    #[test]
    fn extra_stage_only_shrinks_acceptance(c in arb_cascade(), extra in arb_cascade(), seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = Image::from_fn(48, 48, |_, _| rng.random());
        let ii = integral_image(&img).unwrap();
        let mut longer = c.clone();
        longer.stages.push(extra.stages[0].clone());
        for origin in [(0, 0), (10, 5), (24, 24)] {
            let shorter = classify_window(&ii, &c, origin, 1.0).unwrap();
            let more = classify_window(&ii, &longer, origin, 1.0).unwrap();
            prop_assert!(!more || shorter);
        }
    }
}

#[test]
fn cascade_format_errors() {
    let stage = Stage::new(
        vec![(
            stump(FeatureKind::Four, Rect::new(0, 0, 8, 8), 0.5, -1),
            0.25,
        )],
        0.1,
    )
    .unwrap();
    let text = save_cascade(&Cascade::new(24, 24, vec![stage]).unwrap());
    assert!(matches!(
        load_cascade(&text.replacen("CASCADE1", "CASCADE2", 1)),
        Err(DetectorError::VersionMismatch(_))
    ));
    let truncated: String = text
        .lines()
        .take(text.lines().count() - 1)
        .map(|l| format!("{l}\n"))
        .collect();
    assert!(matches!(
        load_cascade(&truncated),
        Err(DetectorError::Parse { .. })
    ));
}

//! Face-vs-background training set for the cascade detector, built from
//! synthetic frames, plus a scorer for held-out frames.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::synth::{synth_frames, SynthFrame, SyntheticSpec};
use super::Result;
use crate::detector::{
    classify_window, detect, feature_pool, train_stage, Cascade, DetectorError, ScanConfig,
    StageSpec,
};
use crate::imaging::{
    integral_image, preprocess, resize_bilinear, Image, IntegralImage, PreprocessConfig, Rect,
};

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorFixture {
    /// Frames positives and negatives are cut from.
    pub synth: SyntheticSpec,
    pub n_positive: usize,
    pub n_negative: usize,
    pub base: usize,
    /// Position/size step of the Haar feature pool.
    pub feature_step: usize,
    pub stages: Vec<StageSpec>,
    pub preprocess: PreprocessConfig,
    pub seed: u64,
}

impl Default for DetectorFixture {
    fn default() -> Self {
        Self {
            synth: SyntheticSpec {
                n_frames: 240,
                seed: 1001,
                ..Default::default()
            },
            n_positive: 240,
            n_negative: 1000,
            base: 24,
            feature_step: 2,
            stages: vec![
                StageSpec {
                    rounds: 6,
                    target_detection_rate: 0.995,
                },
                StageSpec {
                    rounds: 20,
                    target_detection_rate: 0.99,
                },
            ],
            preprocess: PreprocessConfig::default(),
            seed: 7,
        }
    }
}

fn window(img: &Image, r: Rect, base: usize) -> Result<Image> {
    Ok(resize_bilinear(&img.crop(r)?, base, base)?)
}

/// Draws training windows from preprocessed fixture frames.
struct Sampler {
    frames: Vec<(Image, Rect)>,
    rng: ChaCha8Rng,
    base: usize,
    scan_sides: Vec<(usize, usize)>,
    drawn: usize,
}

impl Sampler {
    fn new(fx: &DetectorFixture) -> Result<Self> {
        let frames = synth_frames(&fx.synth)?
            .par_iter()
            .map(|f| Ok((preprocess(&f.image, &fx.preprocess)?, f.face)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            frames,
            rng: ChaCha8Rng::seed_from_u64(fx.seed),
            base: fx.base,
            scan_sides: scan_window_sides(
                fx.base,
                fx.synth.frame_w,
                fx.synth.frame_h,
                &ScanConfig::default(),
            ),
            drawn: 0,
        })
    }

    /// The `i`-th face box, shifted by up to 4% and rescaled by up to 8%.
    fn positive(&mut self, i: usize) -> Result<Image> {
        let (img, gt) = &self.frames[i % self.frames.len()];
        let (fw, fh) = (img.width(), img.height());
        let rng = &mut self.rng;
        let side = (gt.w as f64 * rng.random_range(0.92..1.08)).round() as usize;
        let side = side.clamp(self.base, fw.min(fh));
        let max_shift = (0.04 * gt.w as f64).round() as i64;
        let cx = gt.x as i64
            + (gt.w as i64 - side as i64) / 2
            + rng.random_range(-max_shift..=max_shift);
        let cy = gt.y as i64
            + (gt.h as i64 - side as i64) / 2
            + rng.random_range(-max_shift..=max_shift);
        let x = cx.clamp(0, (fw - side) as i64) as usize;
        let y = cy.clamp(0, (fh - side) as i64) as usize;
        window(img, Rect::new(x, y, side, side), self.base)
    }

    /// A random square overlapping the face by IoU < 0.3. Draws alternate
    /// between a uniform random side and a window picked uniformly from
    /// those a default scan visits, which are mostly small.
    fn negative(&mut self) -> Result<Image> {
        loop {
            let k = self.rng.random_range(0..self.frames.len());
            let (img, face) = &self.frames[k];
            let (fw, fh) = (img.width(), img.height());
            let side = if self.drawn % 2 == 0 {
                self.rng.random_range(self.base..=fw.min(fh))
            } else {
                let pick = self
                    .rng
                    .random_range(0..self.scan_sides.last().map_or(1, |s| s.1));
                self.scan_sides
                    .iter()
                    .find(|s| pick < s.1)
                    .map_or(self.base, |s| s.0)
            };
            let x = self.rng.random_range(0..=fw - side);
            let y = self.rng.random_range(0..=fh - side);
            let r = Rect::new(x, y, side, side);
            if r.iou(face) < 0.3 {
                self.drawn += 1;
                return window(img, r, self.base);
            }
        }
    }
}

/// Positive windows (face boxes with small shifts and rescalings) and
/// negative windows (random squares overlapping the face by IoU < 0.3),
/// all preprocessed and resampled to `base` x `base`.
pub fn detector_samples(fx: &DetectorFixture) -> Result<(Vec<Image>, Vec<Image>)> {
    let mut s = Sampler::new(fx)?;
    let positives = (0..fx.n_positive)
        .map(|i| s.positive(i))
        .collect::<Result<_>>()?;
    let negatives = (0..fx.n_negative)
        .map(|_| s.negative())
        .collect::<Result<_>>()?;
    Ok((positives, negatives))
}

/// Window sides visited by a scan of a `fw` x `fh` frame, each paired with
/// the cumulative number of scan positions up to and including that side.
fn scan_window_sides(base: usize, fw: usize, fh: usize, scan: &ScanConfig) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut total = 0;
    let mut scale = 1.0f64;
    loop {
        let side = (base as f64 * scale).round() as usize;
        if side > fw.min(fh) {
            break;
        }
        let step = ((scan.step_frac * side as f64).round() as usize).max(1);
        total += ((fw - side) / step + 1) * ((fh - side) / step + 1);
        out.push((side, total));
        scale *= scan.scale_factor;
    }
    out
}

/// Random draws tried per requested negative when refilling a later stage.
const REFILL_ATTEMPTS: usize = 100;

/// Trains the cascade stage by stage. Every stage after the first sees a
/// full set of negatives: those the earlier stages still accept, topped up
/// with fresh random draws the earlier stages also accept.
pub fn train_detector(fx: &DetectorFixture) -> Result<Cascade> {
    if fx.stages.is_empty() {
        return Err(DetectorError::Invalid("at least one stage spec required".into()).into());
    }
    let mut sampler = Sampler::new(fx)?;
    let base = (fx.base, fx.base);
    let pool = feature_pool(fx.base, fx.base, fx.feature_step);
    let positives = (0..fx.n_positive)
        .map(|i| Ok(integral_image(&sampler.positive(i)?)?))
        .collect::<Result<Vec<_>>>()?;
    let mut negatives = Vec::with_capacity(fx.n_negative);
    let mut stages = Vec::with_capacity(fx.stages.len());
    for (i, spec) in fx.stages.iter().enumerate() {
        let partial = (i > 0)
            .then(|| Cascade::new(fx.base, fx.base, stages.clone()))
            .transpose()?;
        let accepted = |ii: &IntegralImage| match &partial {
            Some(c) => classify_window(ii, c, (0, 0), 1.0),
            None => Ok(true),
        };
        let mut kept = Vec::with_capacity(fx.n_negative);
        for ii in negatives.drain(..) {
            if accepted(&ii)? {
                kept.push(ii);
            }
        }
        negatives = kept;
        let mut attempts = 0;
        while negatives.len() < fx.n_negative && attempts < REFILL_ATTEMPTS * fx.n_negative {
            attempts += 1;
            let ii = integral_image(&sampler.negative()?)?;
            if accepted(&ii)? {
                negatives.push(ii);
            }
        }
        if negatives.is_empty() {
            log::info!("no negatives pass the first {i} stages; stopping early");
            break;
        }
        log::info!(
            "stage {}: {} positives, {} negatives, {} features",
            i + 1,
            positives.len(),
            negatives.len(),
            pool.len()
        );
        stages.push(train_stage(
            &positives,
            &negatives,
            &pool,
            base,
            spec.rounds,
            spec.target_detection_rate,
        )?);
    }
    Ok(Cascade::new(fx.base, fx.base, stages)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorScore {
    pub frames: usize,
    pub detected: usize,
    pub false_positives: usize,
    pub max_false_positives: usize,
}

impl DetectorScore {
    pub fn detection_rate(&self) -> f64 {
        self.detected as f64 / self.frames.max(1) as f64
    }

    pub fn false_positives_per_frame(&self) -> f64 {
        self.false_positives as f64 / self.frames.max(1) as f64
    }
}

/// A box matches the true face when its centre lies within 10% of the face
/// side and its size is within a factor 1.4 of it.
pub fn matches_face(found: Rect, truth: Rect) -> bool {
    let (fx, fy) = found.center();
    let (tx, ty) = truth.center();
    let side = truth.w as f64;
    let ratio = found.w as f64 / side;
    ((fx - tx).powi(2) + (fy - ty).powi(2)).sqrt() <= 0.1 * side
        && (1.0 / 1.4..=1.4).contains(&ratio)
}

/// Detection rate and false positives on frames with known face boxes.
/// At most one box per frame counts as a hit; every other box is a false
/// positive.
pub fn evaluate_detector(
    cascade: &Cascade,
    frames: &[SynthFrame],
    scan: &ScanConfig,
    pre: &PreprocessConfig,
) -> Result<DetectorScore> {
    let per_frame: Vec<(bool, usize)> = frames
        .par_iter()
        .map(|f| -> Result<(bool, usize)> {
            let img = preprocess(&f.image, pre)?;
            let boxes = detect(&img, cascade, scan)?;
            let hit = boxes.iter().any(|b| matches_face(b.rect, f.face));
            Ok((hit, boxes.len() - hit as usize))
        })
        .collect::<Result<_>>()?;
    Ok(DetectorScore {
        frames: frames.len(),
        detected: per_frame.iter().filter(|p| p.0).count(),
        false_positives: per_frame.iter().map(|p| p.1).sum(),
        max_false_positives: per_frame.iter().map(|p| p.1).max().unwrap_or(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_shapes() {
        let fx = DetectorFixture {
            synth: SyntheticSpec {
                n_frames: 6,
                ..Default::default()
            },
            n_positive: 10,
            n_negative: 15,
            ..Default::default()
        };
        let (p, n) = detector_samples(&fx).unwrap();
        assert_eq!((p.len(), n.len()), (10, 15));
        assert!(p
            .iter()
            .chain(&n)
            .all(|i| i.width() == 24 && i.height() == 24));
    }

    #[test]
    fn match_rule() {
        let t = Rect::new(30, 30, 100, 100);
        assert!(matches_face(Rect::new(35, 33, 100, 100), t));
        assert!(!matches_face(Rect::new(45, 30, 100, 100), t));
        assert!(!matches_face(Rect::new(0, 0, 160, 160), t));
    }
}

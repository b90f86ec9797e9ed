use rayon::prelude::*;

use super::boost::stump_fires;
use super::haar::{HaarFeature, Window};
use super::{DetectorError, Result};
use crate::imaging::{Image, IntegralImage, Rect};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakClassifier {
    pub feature: HaarFeature,
    pub threshold: f64,
    /// +1 or -1.
    pub polarity: i8,
}

/// Boosted stage: weighted votes of weak classifiers compared against a threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub weak: Vec<(WeakClassifier, f64)>,
    pub threshold: f64,
}

impl Stage {
    pub fn new(weak: Vec<(WeakClassifier, f64)>, threshold: f64) -> Result<Self> {
        if weak.is_empty() {
            return Err(DetectorError::Invalid(
                "stage without weak classifiers".into(),
            ));
        }
        for (wc, alpha) in &weak {
            if wc.polarity != 1 && wc.polarity != -1 {
                return Err(DetectorError::Invalid(format!(
                    "polarity must be +1 or -1, got {}",
                    wc.polarity
                )));
            }
            if !(*alpha >= 0.0) {
                return Err(DetectorError::Invalid(format!("negative weight {alpha}")));
            }
        }
        Ok(Self { weak, threshold })
    }

    pub(crate) fn score(&self, ii: &IntegralImage, window: &Window) -> f64 {
        self.weak
            .iter()
            .filter(|(wc, _)| stump_fires(window.eval(ii, &wc.feature), wc.threshold, wc.polarity))
            .map(|(_, alpha)| alpha)
            .sum()
    }

    pub(crate) fn passes(&self, ii: &IntegralImage, window: &Window) -> bool {
        self.score(ii, window) >= self.threshold
    }
}

/// Attentional cascade over a fixed base window.
#[derive(Debug, Clone, PartialEq)]
pub struct Cascade {
    pub base_w: usize,
    pub base_h: usize,
    pub stages: Vec<Stage>,
}

impl Cascade {
    pub fn new(base_w: usize, base_h: usize, stages: Vec<Stage>) -> Result<Self> {
        if base_w == 0 || base_h == 0 {
            return Err(DetectorError::Invalid(
                "base window must be non-empty".into(),
            ));
        }
        if stages.is_empty() {
            return Err(DetectorError::Invalid("cascade without stages".into()));
        }
        for stage in &stages {
            if let Some((wc, _)) = stage
                .weak
                .iter()
                .find(|(wc, _)| !wc.feature.fits(base_w, base_h))
            {
                return Err(DetectorError::Invalid(format!(
                    "feature {:?} exceeds the {base_w}x{base_h} base window",
                    wc.feature
                )));
            }
        }
        Ok(Self {
            base_w,
            base_h,
            stages,
        })
    }

    pub fn base(&self) -> (usize, usize) {
        (self.base_w, self.base_h)
    }

    /// Runs the stages in order, returning the verdict and how many stages ran.
    pub(crate) fn run(&self, ii: &IntegralImage, window: &Window) -> (bool, usize) {
        for (i, stage) in self.stages.iter().enumerate() {
            if !stage.passes(ii, window) {
                return (false, i + 1);
            }
        }
        (true, self.stages.len())
    }
}

/// True iff the window passes every stage.
pub fn classify_window(
    ii: &IntegralImage,
    cascade: &Cascade,
    origin: (usize, usize),
    scale: f64,
) -> Result<bool> {
    classify_window_counted(ii, cascade, origin, scale).map(|(hit, _)| hit)
}

/// Like [`classify_window`], also reporting the number of stages evaluated.
pub fn classify_window_counted(
    ii: &IntegralImage,
    cascade: &Cascade,
    origin: (usize, usize),
    scale: f64,
) -> Result<(bool, usize)> {
    let window = Window::new(ii, origin, scale, cascade.base())?;
    Ok(cascade.run(ii, &window))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanConfig {
    pub scale_factor: f64,
    pub step_frac: f64,
    pub group_iou: f64,
    pub min_neighbors: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            scale_factor: 1.25,
            step_frac: 0.08,
            group_iou: 0.3,
            min_neighbors: 3,
        }
    }
}

/// A grouped detection. `score` counts the raw windows merged into it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceBox {
    pub rect: Rect,
    pub score: usize,
}

/// Multi-scale sliding-window scan followed by overlap grouping.
pub fn detect(img: &Image, cascade: &Cascade, scan: &ScanConfig) -> Result<Vec<FaceBox>> {
    let (w, h) = (img.width(), img.height());
    if w < cascade.base_w || h < cascade.base_h {
        return Err(DetectorError::ImageTooSmall {
            width: w,
            height: h,
            base_w: cascade.base_w,
            base_h: cascade.base_h,
        });
    }
    if !(scan.scale_factor > 1.0) || !(scan.step_frac > 0.0) {
        return Err(DetectorError::Invalid(format!(
            "scan needs scale_factor > 1 and step_frac > 0, got {} / {}",
            scan.scale_factor, scan.step_frac
        )));
    }
    let ii = IntegralImage::new(img)?;

    let mut scales = Vec::new();
    let mut scale = 1.0f64;
    loop {
        let (ww, wh) = Window::scaled_size(cascade.base_w, cascade.base_h, scale);
        if ww > w || wh > h {
            break;
        }
        scales.push(scale);
        scale *= scan.scale_factor;
    }

    let mut raw: Vec<Rect> = scales
        .par_iter()
        .flat_map_iter(|&s| {
            let (ww, wh) = Window::scaled_size(cascade.base_w, cascade.base_h, s);
            let step = ((scan.step_frac * ww as f64).round() as usize).max(1);
            let ii = &ii;
            (0..=h - wh).step_by(step).flat_map(move |y| {
                (0..=w - ww).step_by(step).filter_map(move |x| {
                    let win = Window::new(ii, (x, y), s, cascade.base()).ok()?;
                    cascade.run(ii, &win).0.then_some(Rect::new(x, y, ww, wh))
                })
            })
        })
        .collect();
    raw.sort_by_key(|r| (r.y, r.x, r.w, r.h));
    Ok(group_hits(&raw, scan.group_iou, scan.min_neighbors, w, h))
}

/// Union-find grouping of overlapping raw hits into mean boxes.
fn group_hits(raw: &[Rect], iou: f64, min_neighbors: usize, w: usize, h: usize) -> Vec<FaceBox> {
    let n = raw.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if raw[i].iou(&raw[j]) >= iou {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<Rect>> = Default::default();
    for (i, r) in raw.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(*r);
    }
    let mut out: Vec<FaceBox> = groups
        .into_values()
        .filter(|g| g.len() >= min_neighbors.max(1))
        .map(|g| {
            let k = g.len() as f64;
            let mean = |f: fn(&Rect) -> usize| {
                (g.iter().map(|r| f(r) as f64).sum::<f64>() / k + 0.5).floor() as usize
            };
            let (mut x, mut y) = (mean(|r| r.x), mean(|r| r.y));
            let (bw, bh) = (mean(|r| r.w).clamp(1, w), mean(|r| r.h).clamp(1, h));
            x = x.min(w - bw);
            y = y.min(h - bh);
            FaceBox {
                rect: Rect::new(x, y, bw, bh),
                score: g.len(),
            }
        })
        .collect();
    out.sort_by_key(|b| (b.rect.y, b.rect.x, b.rect.w, b.rect.h));
    out
}

use super::{DetectorError, Result};
use crate::imaging::{IntegralImage, Rect};

/// Layout of a Haar-like feature. Sub-rectangle weights are chosen so that
/// the positive and negative areas cancel on a constant image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    /// Left half minus right half.
    TwoHorizontal,
    /// Top half minus bottom half.
    TwoVertical,
    /// Outer thirds minus twice the middle third, split along x.
    ThreeHorizontal,
    /// Outer thirds minus twice the middle third, split along y.
    ThreeVertical,
    /// Main diagonal quadrants minus the anti-diagonal ones.
    Four,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] = [
        FeatureKind::TwoHorizontal,
        FeatureKind::TwoVertical,
        FeatureKind::ThreeHorizontal,
        FeatureKind::ThreeVertical,
        FeatureKind::Four,
    ];

    /// Cell grid (columns, rows).
    pub fn grid(self) -> (usize, usize) {
        match self {
            FeatureKind::TwoHorizontal => (2, 1),
            FeatureKind::TwoVertical => (1, 2),
            FeatureKind::ThreeHorizontal => (3, 1),
            FeatureKind::ThreeVertical => (1, 3),
            FeatureKind::Four => (2, 2),
        }
    }

    /// Weight of cell (col, row).
    fn weight(self, col: usize, row: usize) -> i64 {
        match self {
            FeatureKind::TwoHorizontal => [1, -1][col],
            FeatureKind::TwoVertical => [1, -1][row],
            FeatureKind::ThreeHorizontal => [1, -2, 1][col],
            FeatureKind::ThreeVertical => [1, -2, 1][row],
            FeatureKind::Four => {
                if col == row {
                    1
                } else {
                    -1
                }
            }
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            FeatureKind::TwoHorizontal => "2H",
            FeatureKind::TwoVertical => "2V",
            FeatureKind::ThreeHorizontal => "3H",
            FeatureKind::ThreeVertical => "3V",
            FeatureKind::Four => "4",
        }
    }

    pub fn from_token(tok: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.token() == tok)
    }
}

/// A feature placed inside the base detection window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HaarFeature {
    pub kind: FeatureKind,
    pub rect: Rect,
}

impl HaarFeature {
    pub fn new(kind: FeatureKind, rect: Rect) -> Result<Self> {
        let (nx, ny) = kind.grid();
        if rect.w == 0 || rect.h == 0 || rect.w % nx != 0 || rect.h % ny != 0 {
            return Err(DetectorError::Invalid(format!(
                "{} feature rect {rect:?} does not split into {nx}x{ny} equal cells",
                kind.token()
            )));
        }
        Ok(Self { kind, rect })
    }

    pub fn fits(&self, base_w: usize, base_h: usize) -> bool {
        self.rect.fits(base_w, base_h)
    }
}

/// A detection window placed in an image: origin, scale and the cached
/// normalisation divisor.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Window {
    pub x: usize,
    pub y: usize,
    pub scale: f64,
    inv_std: f64,
}

impl Window {
    /// Window size in pixels for a base size at a given scale.
    pub fn scaled_size(base_w: usize, base_h: usize, scale: f64) -> (usize, usize) {
        (
            ((base_w as f64 * scale).floor() as usize).max(1),
            ((base_h as f64 * scale).floor() as usize).max(1),
        )
    }

    pub fn new(
        ii: &IntegralImage,
        origin: (usize, usize),
        scale: f64,
        base: (usize, usize),
    ) -> Result<Self> {
        let (w, h) = Self::scaled_size(base.0, base.1, scale);
        let rect = Rect::new(origin.0, origin.1, w, h);
        if !(scale >= 1.0) || !rect.fits(ii.width(), ii.height()) {
            return Err(DetectorError::OutOfBounds {
                rect,
                scale,
                width: ii.width(),
                height: ii.height(),
            });
        }
        let n = (w * h) as f64;
        let sum = ii.rect_sum_unchecked(rect.x, rect.y, w, h) as f64;
        let sq = ii.rect_square_sum_unchecked(rect.x, rect.y, w, h) as f64;
        let mean = sum / n;
        let std = (sq / n - mean * mean).max(0.0).sqrt().max(1.0);
        Ok(Self {
            x: origin.0,
            y: origin.1,
            scale,
            inv_std: 1.0 / std,
        })
    }

    /// Feature response inside this window. The caller guarantees the
    /// feature fits the base window the window was built for.
    #[inline]
    pub fn eval(&self, ii: &IntegralImage, feature: &HaarFeature) -> f64 {
        let (nx, ny) = feature.kind.grid();
        let r = feature.rect;
        let (cell_w, cell_h) = (r.w / nx, r.h / ny);
        let (x0, y0, cw, ch, area_ratio) = if self.scale == 1.0 {
            (r.x, r.y, cell_w, cell_h, 1.0)
        } else {
            let s = self.scale;
            let cw = ((cell_w as f64 * s).floor() as usize).max(1);
            let ch = ((cell_h as f64 * s).floor() as usize).max(1);
            (
                (r.x as f64 * s).floor() as usize,
                (r.y as f64 * s).floor() as usize,
                cw,
                ch,
                (cell_w * cell_h) as f64 / (cw * ch) as f64,
            )
        };
        let mut acc: i64 = 0;
        for row in 0..ny {
            for col in 0..nx {
                let s =
                    ii.rect_sum_unchecked(self.x + x0 + col * cw, self.y + y0 + row * ch, cw, ch)
                        as i64;
                acc += feature.kind.weight(col, row) * s;
            }
        }
        acc as f64 * area_ratio * self.inv_std
    }
}

/// Variance-normalised response of `feature` in the window at `origin`
/// scaled by `scale` (>= 1) from a `base` (width, height) window.
pub fn eval_feature(
    ii: &IntegralImage,
    feature: &HaarFeature,
    origin: (usize, usize),
    scale: f64,
    base: (usize, usize),
) -> Result<f64> {
    if !feature.fits(base.0, base.1) {
        return Err(DetectorError::Invalid(format!(
            "feature {feature:?} exceeds the {}x{} base window",
            base.0, base.1
        )));
    }
    let window = Window::new(ii, origin, scale, base)?;
    Ok(window.eval(ii, feature))
}

/// All features of every kind whose position and size are multiples of
/// `step` inside a `base_w` x `base_h` window.
pub fn feature_pool(base_w: usize, base_h: usize, step: usize) -> Vec<HaarFeature> {
    assert!(step > 0, "feature grid step must be positive");
    let mut pool = Vec::new();
    for kind in FeatureKind::ALL {
        let (nx, ny) = kind.grid();
        for w in (step..=base_w).step_by(step).filter(|w| w % nx == 0) {
            for h in (step..=base_h).step_by(step).filter(|h| h % ny == 0) {
                for y in (0..=base_h - h).step_by(step) {
                    for x in (0..=base_w - w).step_by(step) {
                        pool.push(HaarFeature {
                            kind,
                            rect: Rect::new(x, y, w, h),
                        });
                    }
                }
            }
        }
    }
    pool
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Image;

    #[test]
    fn constant_image_gives_zero() {
        let ii = IntegralImage::new(&Image::filled(24, 24, 90)).unwrap();
        for f in feature_pool(24, 24, 4) {
            assert_eq!(eval_feature(&ii, &f, (0, 0), 1.0, (24, 24)).unwrap(), 0.0);
        }
    }

    #[test]
    fn half_split_response() {
        let img = Image::from_fn(24, 24, |x, _| if x < 12 { 255 } else { 0 });
        let ii = IntegralImage::new(&img).unwrap();
        let f = HaarFeature::new(FeatureKind::TwoHorizontal, Rect::new(0, 0, 24, 24)).unwrap();
        let v = eval_feature(&ii, &f, (0, 0), 1.0, (24, 24)).unwrap();
        // std of a half-0 / half-255 window is 127.5
        assert!((v - 12.0 * 24.0 * 255.0 / 127.5).abs() < 1e-9);
    }

    #[test]
    fn feature_validation() {
        assert!(HaarFeature::new(FeatureKind::ThreeHorizontal, Rect::new(0, 0, 4, 2)).is_err());
        assert!(HaarFeature::new(FeatureKind::Four, Rect::new(0, 0, 4, 3)).is_err());
        assert!(HaarFeature::new(FeatureKind::TwoVertical, Rect::new(0, 0, 3, 4)).is_ok());
    }

    #[test]
    fn pool_is_valid_and_sized() {
        let pool = feature_pool(24, 24, 2);
        assert!(
            pool.len() > 10_000 && pool.len() < 100_000,
            "{}",
            pool.len()
        );
        for f in &pool {
            assert!(f.fits(24, 24));
            assert!(HaarFeature::new(f.kind, f.rect).is_ok());
        }
    }

    #[test]
    fn window_must_fit() {
        let ii = IntegralImage::new(&Image::filled(30, 30, 1)).unwrap();
        let f = HaarFeature::new(FeatureKind::TwoHorizontal, Rect::new(0, 0, 2, 2)).unwrap();
        assert!(eval_feature(&ii, &f, (7, 0), 1.0, (24, 24)).is_err());
        assert!(eval_feature(&ii, &f, (0, 0), 1.25, (24, 24)).is_ok());
        assert!(eval_feature(&ii, &f, (0, 0), 1.3, (24, 24)).is_err());
    }

    #[test]
    fn scaled_features_cancel_on_constant_images() {
        let ii = IntegralImage::new(&Image::filled(100, 100, 200)).unwrap();
        for f in feature_pool(24, 24, 6) {
            for s in [1.25, 1.5625, 2.0, 3.7] {
                assert_eq!(eval_feature(&ii, &f, (3, 5), s, (24, 24)).unwrap(), 0.0);
            }
        }
    }
}

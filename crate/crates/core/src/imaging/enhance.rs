//! Low-light preprocessing: an edge-preserving smoother followed by
//! tile-based clipped histogram equalization.

use super::{round_to_u8, to_grayscale, Image, ImagingError, Result};

const RADIUS: isize = 2;

/// Precomputed weights of the edge-preserving smoother.
struct BilateralKernel {
    spatial: Vec<f64>,
    range: Vec<f64>,
}

impl BilateralKernel {
    fn new(spatial_sigma: f64, range_sigma: f64) -> Result<Self> {
        if !(spatial_sigma > 0.0 && range_sigma > 0.0) {
            return Err(ImagingError::Invalid(format!(
                "denoise sigmas must be positive, got {spatial_sigma} / {range_sigma}"
            )));
        }
        let side = (2 * RADIUS + 1) as usize;
        let mut spatial = Vec::with_capacity(side * side);
        for dy in -RADIUS..=RADIUS {
            for dx in -RADIUS..=RADIUS {
                let d2 = (dx * dx + dy * dy) as f64;
                spatial.push((-d2 / (2.0 * spatial_sigma * spatial_sigma)).exp());
            }
        }
        let range = (0..256)
            .map(|d| {
                let d = d as f64;
                (-(d * d) / (2.0 * range_sigma * range_sigma)).exp()
            })
            .collect();
        Ok(Self { spatial, range })
    }

    /// Unrounded filter response at (x, y).
    fn response(&self, img: &Image, x: isize, y: isize) -> f64 {
        let (w, h) = (img.width() as isize, img.height() as isize);
        let center = img.get(x as usize, y as usize);
        let mut num = 0.0;
        let mut den = 0.0;
        let mut k = 0;
        for dy in -RADIUS..=RADIUS {
            let yy = (y + dy).clamp(0, h - 1) as usize;
            for dx in -RADIUS..=RADIUS {
                let xx = (x + dx).clamp(0, w - 1) as usize;
                let q = img.get(xx, yy);
                let wgt = self.spatial[k] * self.range[center.abs_diff(q) as usize];
                num += wgt * q as f64;
                den += wgt;
                k += 1;
            }
        }
        num / den
    }
}

/// Bilateral-style smoothing over a 5x5 neighbourhood with clamp-replicated borders.
pub fn denoise(img: &Image, spatial_sigma: f64, range_sigma: f64) -> Result<Image> {
    img.require_gray("denoise")?;
    let kernel = BilateralKernel::new(spatial_sigma, range_sigma)?;
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mut out = Vec::with_capacity(img.data().len());
    for y in 0..h {
        for x in 0..w {
            out.push(round_to_u8(kernel.response(img, x, y)));
        }
    }
    Image::gray(img.width(), img.height(), out)
}

/// Tile-based clipped histogram equalization with bilinear blending of the
/// per-tile mappings. `clip_limit` may be `f64::INFINITY` to disable clipping.
pub fn enhance_contrast(img: &Image, tiles: usize, clip_limit: f64) -> Result<Image> {
    img.require_gray("enhance_contrast")?;
    if tiles == 0 {
        return Err(ImagingError::Invalid("tiles must be at least 1".into()));
    }
    if clip_limit.is_nan() || clip_limit < 1.0 {
        return Err(ImagingError::Invalid(format!(
            "clip_limit must be >= 1, got {clip_limit}"
        )));
    }
    let (w, h) = (img.width(), img.height());
    let tx = tiles.min(w);
    let ty = tiles.min(h);
    let x_edges: Vec<usize> = (0..=tx).map(|i| i * w / tx).collect();
    let y_edges: Vec<usize> = (0..=ty).map(|i| i * h / ty).collect();

    let mut maps = Vec::with_capacity(tx * ty);
    for j in 0..ty {
        for i in 0..tx {
            let mut hist = [0u32; 256];
            for y in y_edges[j]..y_edges[j + 1] {
                for x in x_edges[i]..x_edges[i + 1] {
                    hist[img.get(x, y) as usize] += 1;
                }
            }
            maps.push(tile_mapping(&hist, clip_limit));
        }
    }

    let centers = |edges: &[usize]| -> Vec<f64> {
        edges
            .windows(2)
            .map(|e| (e[0] + e[1]) as f64 / 2.0 - 0.5)
            .collect()
    };
    let cx = centers(&x_edges);
    let cy = centers(&y_edges);
    let xs: Vec<(usize, usize, f64)> = (0..w).map(|x| bracket(&cx, x as f64)).collect();

    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (j0, j1, fy) = bracket(&cy, y as f64);
        for (x, &(i0, i1, fx)) in xs.iter().enumerate() {
            let v = img.get(x, y) as usize;
            let m00 = maps[j0 * tx + i0][v];
            let m10 = maps[j0 * tx + i1][v];
            let m01 = maps[j1 * tx + i0][v];
            let m11 = maps[j1 * tx + i1][v];
            let top = m00 + (m10 - m00) * fx;
            let bottom = m01 + (m11 - m01) * fx;
            out.push(round_to_u8(top + (bottom - top) * fy));
        }
    }
    Image::gray(w, h, out)
}

/// Equalization lookup table for one tile.
fn tile_mapping(hist: &[u32; 256], clip_limit: f64) -> [f64; 256] {
    let mut identity = [0.0; 256];
    for (v, m) in identity.iter_mut().enumerate() {
        *m = v as f64;
    }
    if hist.iter().filter(|&&c| c > 0).count() <= 1 {
        return identity;
    }
    let total: f64 = hist.iter().map(|&c| c as f64).sum();
    let limit = clip_limit * total / 256.0;
    let mut clipped = [0.0f64; 256];
    let mut excess = 0.0;
    for (c, &raw) in clipped.iter_mut().zip(hist) {
        let raw = raw as f64;
        if raw > limit {
            excess += raw - limit;
            *c = limit;
        } else {
            *c = raw;
        }
    }
    let bonus = excess / 256.0;
    let mut cdf = [0.0f64; 256];
    let mut acc = 0.0;
    for (slot, c) in cdf.iter_mut().zip(clipped) {
        acc += c + bonus;
        *slot = acc;
    }
    let first = clipped
        .iter()
        .position(|&c| c + bonus > 0.0)
        .expect("histogram has at least two bins");
    let cdf_min = cdf[first];
    let span = acc - cdf_min;
    let mut map = [0.0; 256];
    for (m, c) in map.iter_mut().zip(cdf) {
        *m = ((c - cdf_min) / span * 255.0).clamp(0.0, 255.0);
    }
    map
}

/// Index pair and blend fraction for a coordinate between tile centers.
fn bracket(centers: &[f64], p: f64) -> (usize, usize, f64) {
    let last = centers.len() - 1;
    if p <= centers[0] {
        return (0, 0, 0.0);
    }
    if p >= centers[last] {
        return (last, last, 0.0);
    }
    let hi = centers.partition_point(|&c| c <= p);
    let lo = hi - 1;
    (lo, hi, (p - centers[lo]) / (centers[hi] - centers[lo]))
}

/// When to run the contrast stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowLightMode {
    /// Enhance when the mean gray level falls below the threshold.
    Auto,
    Always,
    Never,
}

impl std::str::FromStr for LowLightMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Self::Auto),
            "always" | "on" => Ok(Self::Always),
            "never" | "off" => Ok(Self::Never),
            other => Err(format!("unknown low-light mode {other:?}")),
        }
    }
}

impl std::fmt::Display for LowLightMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::Always => "always",
            Self::Never => "never",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub spatial_sigma: f64,
    pub range_sigma: f64,
    pub tiles: usize,
    pub clip_limit: f64,
    pub low_light_threshold: f64,
    pub low_light: LowLightMode,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            spatial_sigma: 1.5,
            range_sigma: 25.0,
            tiles: 8,
            clip_limit: 2.0,
            low_light_threshold: 60.0,
            low_light: LowLightMode::Auto,
        }
    }
}

impl PreprocessConfig {
    pub fn enhancement_enabled(&self, gray: &Image) -> bool {
        match self.low_light {
            LowLightMode::Always => true,
            LowLightMode::Never => false,
            LowLightMode::Auto => gray.mean() < self.low_light_threshold,
        }
    }
}

/// Grayscale, then denoise, then (for dim frames) contrast enhancement.
/// Noise is removed first so the contrast stage does not amplify it.
pub fn preprocess(img: &Image, config: &PreprocessConfig) -> Result<Image> {
    let gray = to_grayscale(img);
    let enhance = config.enhancement_enabled(&gray);
    let smooth = denoise(&gray, config.spatial_sigma, config.range_sigma)?;
    if enhance {
        enhance_contrast(&smooth, config.tiles, config.clip_limit)
    } else {
        Ok(smooth)
    }
}

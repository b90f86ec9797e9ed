//! Pixel-level substrate: PNM codec, grayscale conversion, resizing,
//! summed-area tables and the denoise-then-enhance preprocessing chain.

mod enhance;
mod integral;
mod pnm;
mod transform;

pub use enhance::{denoise, enhance_contrast, preprocess, LowLightMode, PreprocessConfig};
pub use integral::{integral_image, rect_sum, IntegralImage};
pub use pnm::{load_pnm, save_pnm};
pub use transform::{resize_bilinear, to_grayscale};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImagingError {
    #[error("malformed PNM header: {0}")]
    MalformedHeader(String),
    #[error("truncated raster: expected {expected} bytes, got {got}")]
    TruncatedRaster { expected: usize, got: usize },
    #[error("unsupported maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u32),
    #[error("rectangle {rect:?} out of bounds for {width}x{height} image")]
    OutOfBounds {
        rect: Rect,
        width: usize,
        height: usize,
    },
    #[error("invalid image: {0}")]
    Invalid(String),
}

pub type Result<T, E = ImagingError> = std::result::Result<T, E>;

/// Axis-aligned rectangle in pixel units: `x` is the left column, `y` the top row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn right(&self) -> usize {
        self.x + self.w
    }

    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    /// True when the rectangle is non-empty and lies inside a `width` x `height` grid.
    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.w > 0 && self.h > 0 && self.right() <= width && self.bottom() <= height
    }

    pub fn intersection_area(&self, other: &Rect) -> usize {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 <= x0 || y1 <= y0 {
            0
        } else {
            (x1 - x0) * (y1 - y0)
        }
    }

    /// Intersection over union.
    pub fn iou(&self, other: &Rect) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + self.w as f64 / 2.0,
            self.y as f64 + self.h as f64 / 2.0,
        )
    }
}

/// Row-major 8-bit image with one (gray) or three (RGB, interleaved) channels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImagingError::Invalid(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(ImagingError::Invalid(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(ImagingError::Invalid(format!(
                "pixel buffer holds {} values, expected {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 1, data)
    }

    /// A single-channel image filled with `value`.
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            channels: 1,
            data: vec![value; width * height],
        }
    }

    /// Builds a gray image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            channels: 1,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn is_gray(&self) -> bool {
        self.channels == 1
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    /// Gray value at column `x`, row `y`. Panics on multi-channel images.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        debug_assert!(self.channels == 1);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        debug_assert!(self.channels == 1);
        self.data[y * self.width + x] = value;
    }

    /// RGB triple at (x, y). Panics on gray images.
    pub fn rgb(&self, x: usize, y: usize) -> [u8; 3] {
        assert_eq!(self.channels, 3, "rgb() needs a three-channel image");
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Copies out a sub-rectangle of a gray image.
    pub fn crop(&self, rect: Rect) -> Result<Image> {
        self.require_gray("crop")?;
        if !rect.fits(self.width, self.height) {
            return Err(ImagingError::OutOfBounds {
                rect,
                width: self.width,
                height: self.height,
            });
        }
        let mut data = Vec::with_capacity(rect.area());
        for y in rect.y..rect.bottom() {
            let row = y * self.width;
            data.extend_from_slice(&self.data[row + rect.x..row + rect.right()]);
        }
        Ok(Image {
            width: rect.w,
            height: rect.h,
            channels: 1,
            data,
        })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Population standard deviation of all stored values.
    pub fn std_dev(&self) -> f64 {
        let mean = self.mean();
        let var = self
            .data
            .iter()
            .map(|&v| {
                let d = v as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / self.data.len() as f64;
        var.sqrt()
    }

    pub(crate) fn require_gray(&self, op: &str) -> Result<()> {
        if self.channels != 1 {
            return Err(ImagingError::Invalid(format!(
                "{op} expects a grayscale image, got {} channels",
                self.channels
            )));
        }
        Ok(())
    }
}

/// Round half up, then clamp into the 8-bit range.
#[inline]
pub(crate) fn round_to_u8(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_buffers() {
        assert!(Image::new(0, 3, 1, vec![]).is_err());
        assert!(Image::new(2, 2, 2, vec![0; 8]).is_err());
        assert!(Image::new(2, 2, 1, vec![0; 3]).is_err());
        assert!(Image::new(2, 2, 3, vec![0; 12]).is_ok());
    }

    #[test]
    fn crop_copies_pixels() {
        let img = Image::from_fn(5, 4, |x, y| (y * 5 + x) as u8);
        let c = img.crop(Rect::new(1, 2, 3, 2)).unwrap();
        assert_eq!(c.data(), &[11, 12, 13, 16, 17, 18]);
        assert!(matches!(
            img.crop(Rect::new(3, 0, 3, 1)),
            Err(ImagingError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn iou_of_rects() {
        let a = Rect::new(0, 0, 10, 10);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.iou(&Rect::new(10, 0, 5, 5)), 0.0);
        let b = Rect::new(5, 0, 10, 10);
        assert!((a.iou(&b) - 50.0 / 150.0).abs() < 1e-12);
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round_to_u8(2.5), 3);
        assert_eq!(round_to_u8(2.4999), 2);
        assert_eq!(round_to_u8(-3.0), 0);
        assert_eq!(round_to_u8(300.0), 255);
    }
}

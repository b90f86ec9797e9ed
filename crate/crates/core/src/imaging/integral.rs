use super::{Image, ImagingError, Rect, Result};

/// Summed-area table with a companion table of squared values.
///
/// Both grids are `(width + 1) x (height + 1)`; `sum(i, j)` is the total of
/// pixels in rows `< i` and columns `< j`, so row 0 and column 0 are zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    sums: Vec<u64>,
    squares: Vec<u64>,
}

impl IntegralImage {
    pub fn new(img: &Image) -> Result<Self> {
        img.require_gray("integral_image")?;
        let (w, h) = (img.width(), img.height());
        let stride = w + 1;
        let mut sums = vec![0u64; stride * (h + 1)];
        let mut squares = vec![0u64; stride * (h + 1)];
        for y in 0..h {
            let mut row_sum = 0u64;
            let mut row_sq = 0u64;
            for x in 0..w {
                let v = img.get(x, y) as u64;
                row_sum += v;
                row_sq += v * v;
                let idx = (y + 1) * stride + x + 1;
                sums[idx] = sums[idx - stride] + row_sum;
                squares[idx] = squares[idx - stride] + row_sq;
            }
        }
        Ok(Self {
            width: w,
            height: h,
            sums,
            squares,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Cumulative sum over rows `< row` and columns `< col`.
    #[inline]
    pub fn sum(&self, row: usize, col: usize) -> u64 {
        self.sums[row * (self.width + 1) + col]
    }

    #[inline]
    pub fn square_sum(&self, row: usize, col: usize) -> u64 {
        self.squares[row * (self.width + 1) + col]
    }

    /// Rectangle sum without bounds checking beyond slice indexing.
    #[inline]
    pub(crate) fn rect_sum_unchecked(&self, x: usize, y: usize, w: usize, h: usize) -> u64 {
        let s = self.width + 1;
        let a = self.sums[y * s + x];
        let b = self.sums[y * s + x + w];
        let c = self.sums[(y + h) * s + x];
        let d = self.sums[(y + h) * s + x + w];
        d + a - b - c
    }

    #[inline]
    pub(crate) fn rect_square_sum_unchecked(&self, x: usize, y: usize, w: usize, h: usize) -> u64 {
        let s = self.width + 1;
        let a = self.squares[y * s + x];
        let b = self.squares[y * s + x + w];
        let c = self.squares[(y + h) * s + x];
        let d = self.squares[(y + h) * s + x + w];
        d + a - b - c
    }

    pub fn rect_sum(&self, rect: Rect) -> Result<u64> {
        self.check(rect)?;
        Ok(self.rect_sum_unchecked(rect.x, rect.y, rect.w, rect.h))
    }

    pub fn rect_square_sum(&self, rect: Rect) -> Result<u64> {
        self.check(rect)?;
        Ok(self.rect_square_sum_unchecked(rect.x, rect.y, rect.w, rect.h))
    }

    fn check(&self, rect: Rect) -> Result<()> {
        if rect.fits(self.width, self.height) {
            Ok(())
        } else {
            Err(ImagingError::OutOfBounds {
                rect,
                width: self.width,
                height: self.height,
            })
        }
    }
}

/// Builds the summed-area tables of a gray image.
pub fn integral_image(img: &Image) -> Result<IntegralImage> {
    IntegralImage::new(img)
}

/// Constant-time pixel sum over `rect`.
pub fn rect_sum(ii: &IntegralImage, rect: Rect) -> Result<u64> {
    ii.rect_sum(rect)
}

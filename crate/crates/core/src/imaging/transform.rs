use super::{round_to_u8, Image, Result};

/// Rec.601 luma. Gray input is returned unchanged.
pub fn to_grayscale(img: &Image) -> Image {
    if img.is_gray() {
        return img.clone();
    }
    let data = img
        .data()
        .chunks_exact(3)
        .map(|px| {
            let y = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    Image::gray(img.width(), img.height(), data).expect("same dimensions as input")
}

/// Bilinear resampling with pixel-center alignment.
pub fn resize_bilinear(img: &Image, new_w: usize, new_h: usize) -> Result<Image> {
    img.require_gray("resize_bilinear")?;
    if new_w == 0 || new_h == 0 {
        return Err(super::ImagingError::Invalid(format!(
            "target size must be positive, got {new_w}x{new_h}"
        )));
    }
    let (sw, sh) = (img.width(), img.height());
    if (sw, sh) == (new_w, new_h) {
        return Ok(img.clone());
    }
    let xs: Vec<(usize, usize, f64)> = (0..new_w).map(|d| sample_coord(d, sw, new_w)).collect();
    let ys: Vec<(usize, usize, f64)> = (0..new_h).map(|d| sample_coord(d, sh, new_h)).collect();
    let mut data = Vec::with_capacity(new_w * new_h);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let p00 = img.get(x0, y0) as f64;
            let p10 = img.get(x1, y0) as f64;
            let p01 = img.get(x0, y1) as f64;
            let p11 = img.get(x1, y1) as f64;
            let top = p00 + (p10 - p00) * fx;
            let bottom = p01 + (p11 - p01) * fx;
            data.push(round_to_u8(top + (bottom - top) * fy));
        }
    }
    Image::gray(new_w, new_h, data)
}

/// Maps destination index `d` to (lower, upper, fraction) in a source axis of `src` samples.
fn sample_coord(d: usize, src: usize, dst: usize) -> (usize, usize, f64) {
    let s = ((d as f64 + 0.5) * (src as f64 / dst as f64) - 0.5).clamp(0.0, (src - 1) as f64);
    let lo = s.floor() as usize;
    let hi = (lo + 1).min(src - 1);
    (lo, hi, s - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn luma_weights() {
        let img = Image::new(3, 1, 3, vec![255, 255, 255, 0, 0, 0, 255, 0, 0]).unwrap();
        let g = to_grayscale(&img);
        assert_eq!(g.data(), &[255, 0, 76]);
        assert_eq!(to_grayscale(&g), g);
    }

    #[test]
    fn resize_cases() {
        let img = Image::gray(2, 2, vec![0, 0, 100, 100]).unwrap();
        assert_eq!(resize_bilinear(&img, 1, 1).unwrap().data(), &[50]);
        assert_eq!(resize_bilinear(&img, 2, 2).unwrap(), img);
        let one = Image::filled(1, 1, 7);
        assert_eq!(resize_bilinear(&one, 3, 3).unwrap().data(), &[7; 9]);
    }

    #[test]
    fn resize_rejects_rgb_and_zero() {
        let rgb = Image::new(1, 1, 3, vec![1, 2, 3]).unwrap();
        assert!(resize_bilinear(&rgb, 2, 2).is_err());
        assert!(resize_bilinear(&Image::filled(2, 2, 0), 0, 2).is_err());
    }
}

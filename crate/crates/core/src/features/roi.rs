use super::{FeaturesError, Result};
use crate::imaging::{resize_bilinear, Image, Rect};

/// Where the eye and mouth windows sit inside the normalised face.
///
/// The default is a 100x100 face with an 80x30 eye strip at (10, 20) and a
/// 40x40 mouth window at (30, 60), giving 2400 + 1600 = 4000 features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoiGeometry {
    pub face_side: usize,
    pub eye: Rect,
    pub mouth: Rect,
}

impl Default for RoiGeometry {
    fn default() -> Self {
        Self {
            face_side: 100,
            eye: Rect::new(10, 20, 80, 30),
            mouth: Rect::new(30, 60, 40, 40),
        }
    }
}

impl RoiGeometry {
    pub fn new(face_side: usize, eye: Rect, mouth: Rect) -> Result<Self> {
        let g = Self {
            face_side,
            eye,
            mouth,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("eye", self.eye), ("mouth", self.mouth)] {
            if !r.fits(self.face_side, self.face_side) {
                return Err(FeaturesError::InvalidGeometry(format!(
                    "{name} window {r:?} does not fit a {0}x{0} face",
                    self.face_side
                )));
            }
        }
        Ok(())
    }

    /// Length of the assembled feature vector.
    pub fn feature_len(&self) -> usize {
        self.eye.area() + self.mouth.area()
    }
}

/// Eye pixels then mouth pixels, row-major, scaled to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Crops the face box and resamples it to a `side` x `side` square.
pub fn normalize_face(img: &Image, face: Rect, side: usize) -> Result<Image> {
    let crop = img.crop(face)?;
    Ok(resize_bilinear(&crop, side, side)?)
}

/// Pure crops of the eye and mouth windows from a normalised face.
pub fn extract_rois(face: &Image, geometry: &RoiGeometry) -> Result<(Image, Image)> {
    let side = geometry.face_side;
    if face.width() != side || face.height() != side || !face.is_gray() {
        return Err(FeaturesError::WrongDimensions {
            expected_w: side,
            expected_h: side,
            got_w: face.width(),
            got_h: face.height(),
        });
    }
    Ok((face.crop(geometry.eye)?, face.crop(geometry.mouth)?))
}

pub fn assemble(eye: &Image, mouth: &Image, geometry: &RoiGeometry) -> Result<FeatureVector> {
    for (img, r) in [(eye, geometry.eye), (mouth, geometry.mouth)] {
        if img.width() != r.w || img.height() != r.h || !img.is_gray() {
            return Err(FeaturesError::WrongDimensions {
                expected_w: r.w,
                expected_h: r.h,
                got_w: img.width(),
                got_h: img.height(),
            });
        }
    }
    let v = eye
        .data()
        .iter()
        .chain(mouth.data())
        .map(|&p| p as f64 / 255.0)
        .collect();
    Ok(FeatureVector(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry() {
        let g = RoiGeometry::default();
        g.validate().unwrap();
        assert_eq!(g.feature_len(), 4000);
        assert!(RoiGeometry::new(100, Rect::new(30, 20, 80, 30), g.mouth).is_err());
    }

    #[test]
    fn roi_origins() {
        let g = RoiGeometry::default();
        let mut face = Image::filled(100, 100, 0);
        face.set(10, 20, 200);
        face.set(30, 60, 100);
        let (eye, mouth) = extract_rois(&face, &g).unwrap();
        assert_eq!((eye.width(), eye.height()), (80, 30));
        assert_eq!((mouth.width(), mouth.height()), (40, 40));
        assert_eq!(eye.get(0, 0), 200);
        assert_eq!(mouth.get(0, 0), 100);
        let v = assemble(&eye, &mouth, &g).unwrap();
        assert_eq!(v.len(), 4000);
        assert!((v.as_slice()[0] - 200.0 / 255.0).abs() < 1e-15);
        assert!((v.as_slice()[2400] - 100.0 / 255.0).abs() < 1e-15);
    }

    #[test]
    fn layout_of_saturated_pixels() {
        let g = RoiGeometry::default();
        let mut eye = Image::filled(80, 30, 0);
        let mut mouth = Image::filled(40, 40, 0);
        let zero = assemble(&eye, &mouth, &g).unwrap();
        assert!(zero.as_slice().iter().all(|&x| x == 0.0));
        eye.set(0, 0, 255);
        mouth.set(0, 0, 255);
        let v = assemble(&eye, &mouth, &g).unwrap();
        assert_eq!(v.as_slice()[0], 1.0);
        assert_eq!(v.as_slice()[2400], 1.0);
    }

    #[test]
    fn wrong_dimensions() {
        let g = RoiGeometry::default();
        assert!(matches!(
            extract_rois(&Image::filled(99, 100, 0), &g),
            Err(FeaturesError::WrongDimensions { .. })
        ));
        assert!(matches!(
            assemble(&Image::filled(30, 80, 0), &Image::filled(40, 40, 0), &g),
            Err(FeaturesError::WrongDimensions { .. })
        ));
    }

    #[test]
    fn normalize_is_pure_crop_at_native_size() {
        let img = Image::from_fn(150, 120, |x, y| ((x * 3 + y * 7) % 256) as u8);
        let r = Rect::new(20, 10, 100, 100);
        assert_eq!(normalize_face(&img, r, 100).unwrap(), img.crop(r).unwrap());
        assert!(matches!(
            normalize_face(&img, Rect::new(60, 30, 100, 100), 100),
            Err(FeaturesError::Imaging(_))
        ));
    }
}

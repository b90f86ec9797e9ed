//! Procedural driver-face frames with known labels and face boxes.
//!
//! Faces are drawn in a 100x100 face coordinate system that is mapped onto
//! a `face_side` square placed at a jittered position. Subjects differ in
//! skin and background tone and in small feature offsets; frames differ in
//! brightness, placement and noise.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::manifest::{write_manifest, ManifestRecord};
use super::{Frame, HarnessError, LabeledFrame, Result};
use crate::classifier::ClassLabel;
use crate::imaging::{save_pnm, Image, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LightLevel {
    Normal,
    Dim,
}

impl std::str::FromStr for LightLevel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "normal" => Ok(LightLevel::Normal),
            "dim" => Ok(LightLevel::Dim),
            other => Err(format!("unknown light level {other:?} (normal|dim)")),
        }
    }
}

impl std::fmt::Display for LightLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LightLevel::Normal => "normal",
            LightLevel::Dim => "dim",
        })
    }
}

/// Facial state drawn in a frame. Everything but `Alert` is labelled fatigued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaceMode {
    Alert,
    EyesClosed,
    Yawn,
    EyesClosedYawn,
}

impl FaceMode {
    pub fn label(self) -> ClassLabel {
        match self {
            FaceMode::Alert => ClassLabel::Alert,
            _ => ClassLabel::Fatigued,
        }
    }

    pub fn eyes_closed(self) -> bool {
        matches!(self, FaceMode::EyesClosed | FaceMode::EyesClosedYawn)
    }

    pub fn yawning(self) -> bool {
        matches!(self, FaceMode::Yawn | FaceMode::EyesClosedYawn)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub frame_w: usize,
    pub frame_h: usize,
    pub n_frames: usize,
    pub fraction_fatigued: f64,
    /// Maximum face offset from the frame centre, in pixels.
    pub jitter: usize,
    pub noise_sigma: f64,
    pub light: LightLevel,
    pub seed: u64,
    /// Side of the square face box, in pixels.
    pub face_side: usize,
    pub n_subjects: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            frame_w: 160,
            frame_h: 160,
            n_frames: 100,
            fraction_fatigued: 0.5,
            jitter: 16,
            noise_sigma: 8.0,
            light: LightLevel::Normal,
            seed: 0,
            face_side: 96,
            n_subjects: 10,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::InvalidSpec(m));
        if self.frame_w < 120 || self.frame_h < 120 {
            return bad(format!(
                "frames must be at least 120x120, got {}x{}",
                self.frame_w, self.frame_h
            ));
        }
        if !(0.0..=1.0).contains(&self.fraction_fatigued) {
            return bad(format!(
                "fraction_fatigued {} outside [0, 1]",
                self.fraction_fatigued
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!(
                "noise_sigma must be non-negative, got {}",
                self.noise_sigma
            ));
        }
        if self.face_side < 24 || self.face_side > self.frame_w.min(self.frame_h) {
            return bad(format!(
                "face_side {} must lie in [24, frame size]",
                self.face_side
            ));
        }
        if self.n_subjects == 0 {
            return bad("n_subjects must be positive".into());
        }
        Ok(())
    }

    pub fn n_fatigued(&self) -> usize {
        (self.n_frames as f64 * self.fraction_fatigued).round() as usize
    }
}

/// Per-subject appearance.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Subject {
    skin: f64,
    background: f64,
    feature: f64,
    eye_dx: f64,
    eye_dy: f64,
    mouth_dy: f64,
}

impl Subject {
    fn draw(rng: &mut impl Rng) -> Self {
        Self {
            skin: rng.random_range(160.0..200.0),
            background: rng.random_range(25.0..55.0),
            feature: rng.random_range(35.0..60.0),
            eye_dx: rng.random_range(-3.0..3.0),
            eye_dy: rng.random_range(-2.0..2.0),
            mouth_dy: rng.random_range(-2.0..2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthFrame {
    pub image: Image,
    pub mode: FaceMode,
    pub face: Rect,
    pub subject: usize,
}

impl SynthFrame {
    pub fn label(&self) -> ClassLabel {
        self.mode.label()
    }

    pub fn group(&self) -> String {
        format!("s{:02}", self.subject)
    }

    pub fn to_labeled(&self) -> LabeledFrame {
        LabeledFrame {
            frame: Frame {
                image: self.image.clone(),
                face: Some(self.face),
            },
            label: self.label(),
            group: Some(self.group()),
        }
    }
}

#[inline]
fn in_ellipse(u: f64, v: f64, cu: f64, cv: f64, ru: f64, rv: f64) -> bool {
    let a = (u - cu) / ru;
    let b = (v - cv) / rv;
    a * a + b * b <= 1.0
}

#[inline]
fn on_bar(u: f64, v: f64, cu: f64, cv: f64, half_w: f64) -> bool {
    (u - cu).abs() <= half_w && (v - cv).abs() <= 1.5
}

/// Noise-free intensity at face coordinates (u, v), or None outside the head.
fn face_shade(u: f64, v: f64, mode: FaceMode, s: &Subject) -> Option<f64> {
    if !in_ellipse(u, v, 50.0, 50.0, 46.0, 50.0) {
        return None;
    }
    let eye_v = 36.0 + s.eye_dy;
    let eyes = [30.0 - s.eye_dx, 70.0 + s.eye_dx];
    let eye_hit = eyes.iter().any(|&cu| {
        if mode.eyes_closed() {
            on_bar(u, v, cu, eye_v, 12.0)
        } else {
            in_ellipse(u, v, cu, eye_v, 12.0, 8.0)
        }
    });
    let mouth_v = 80.0 + s.mouth_dy;
    let mouth_hit = if mode.yawning() {
        in_ellipse(u, v, 50.0, mouth_v, 11.0, 15.0)
    } else {
        on_bar(u, v, 50.0, mouth_v, 12.0)
    };
    Some(if eye_hit || mouth_hit {
        s.feature
    } else {
        s.skin
    })
}

/// Renders one frame. `rng` drives placement, brightness and noise.
fn render(
    spec: &SyntheticSpec,
    mode: FaceMode,
    subject: &Subject,
    rng: &mut ChaCha8Rng,
) -> (Image, Rect) {
    let fs = spec.face_side;
    let j = spec.jitter as i64;
    let place = |frame: usize, rng: &mut ChaCha8Rng| {
        let centre = (frame - fs) as i64 / 2;
        let off = if j > 0 { rng.random_range(-j..=j) } else { 0 };
        (centre + off).clamp(0, (frame - fs) as i64) as usize
    };
    let fx = place(spec.frame_w, rng);
    let fy = place(spec.frame_h, rng);
    let gain = rng.random_range(0.9..1.1)
        * match spec.light {
            LightLevel::Normal => 1.0,
            LightLevel::Dim => 0.35,
        };
    let noise = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
    let scale = 100.0 / fs as f64;
    let img = Image::from_fn(spec.frame_w, spec.frame_h, |x, y| {
        let u = (x as f64 + 0.5 - fx as f64) * scale;
        let v = (y as f64 + 0.5 - fy as f64) * scale;
        let base = face_shade(u, v, mode, subject).unwrap_or(subject.background);
        let n = if spec.noise_sigma > 0.0 {
            noise.sample(rng)
        } else {
            0.0
        };
        (base * gain + n).round().clamp(0.0, 255.0) as u8
    });
    (img, Rect::new(fx, fy, fs, fs))
}

/// Renders a single frame of a given mode, for fixtures and tests.
pub fn render_frame(spec: &SyntheticSpec, mode: FaceMode, stream: u64) -> Result<SynthFrame> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let subject = Subject::draw(&mut rng);
    rng.set_stream(stream);
    let (image, face) = render(spec, mode, &subject, &mut rng);
    Ok(SynthFrame {
        image,
        mode,
        face,
        subject: 0,
    })
}

/// Generates `n_frames` frames in memory. Exactly `round(n * fraction)` are
/// fatigued; their sub-mode is drawn uniformly from eyes-closed, yawn and
/// both. Output depends only on the spec.
pub fn synth_frames(spec: &SyntheticSpec) -> Result<Vec<SynthFrame>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let subjects: Vec<Subject> = (0..spec.n_subjects)
        .map(|_| Subject::draw(&mut rng))
        .collect();
    let n_fat = spec.n_fatigued();
    let mut fatigued: Vec<bool> = (0..spec.n_frames).map(|i| i < n_fat).collect();
    fatigued.shuffle(&mut rng);
    let plan: Vec<(FaceMode, usize)> = fatigued
        .iter()
        .map(|&f| {
            let mode = if f {
                [
                    FaceMode::EyesClosed,
                    FaceMode::Yawn,
                    FaceMode::EyesClosedYawn,
                ][rng.random_range(0..3)]
            } else {
                FaceMode::Alert
            };
            (mode, rng.random_range(0..spec.n_subjects))
        })
        .collect();

    Ok(plan
        .par_iter()
        .enumerate()
        .map(|(i, &(mode, subject))| {
            let mut frng = ChaCha8Rng::seed_from_u64(spec.seed);
            frng.set_stream(i as u64 + 1);
            let (image, face) = render(spec, mode, &subjects[subject], &mut frng);
            SynthFrame {
                image,
                mode,
                face,
                subject,
            }
        })
        .collect())
}

/// Writes frames as `frame_NNNNN.pgm` plus `manifest.csv` into `out_dir`.
/// Returns the manifest records (paths relative to `out_dir`).
pub fn synth_generate(spec: &SyntheticSpec, out_dir: &Path) -> Result<Vec<ManifestRecord>> {
    let frames = synth_frames(spec)?;
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let records: Vec<ManifestRecord> = frames
        .iter()
        .enumerate()
        .map(|(i, f)| ManifestRecord {
            path: format!("frame_{i:05}.pgm").into(),
            label: f.label(),
            group: Some(f.group()),
            face: Some(f.face),
        })
        .collect();
    frames.par_iter().zip(&records).try_for_each(|(f, r)| {
        let path = out_dir.join(&r.path);
        fs::write(&path, save_pnm(&f.image)).map_err(|e| HarnessError::io(path, e))
    })?;
    let manifest = out_dir.join("manifest.csv");
    fs::write(&manifest, write_manifest(&records)).map_err(|e| HarnessError::io(manifest, e))?;
    Ok(records)
}

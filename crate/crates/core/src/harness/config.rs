//! `key = value` configuration with `#` comments.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use super::pipeline::TrainingSettings;
use super::{HarnessError, Result};
use crate::detector::ScanConfig;
use crate::fatigue::AlertConfig;
use crate::features::RoiGeometry;
use crate::imaging::{PreprocessConfig, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorMode {
    /// Use the manifest's face box, or the whole frame.
    Off,
    /// Run the cascade named by `cascade`.
    Cascade,
}

/// What a frame without a detected face contributes to the running sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoFacePolicy {
    Skip,
    TreatAsFatigued,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub detector: DetectorMode,
    pub cascade_path: Option<PathBuf>,
    pub scan: ScanConfig,
    pub preprocess: PreprocessConfig,
    pub geometry: RoiGeometry,
    pub training: TrainingSettings,
    pub folds: usize,
    pub alert: AlertConfig,
    pub no_face: NoFacePolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            detector: DetectorMode::Off,
            cascade_path: None,
            scan: ScanConfig::default(),
            preprocess: PreprocessConfig::default(),
            geometry: RoiGeometry::default(),
            training: TrainingSettings::default(),
            folds: 5,
            alert: AlertConfig::default(),
            no_face: NoFacePolicy::Skip,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| HarnessError::Config(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(HarnessError::Config(format!(
            "bad boolean {value:?} for {key}"
        ))),
    }
}

fn parse_rect(key: &str, value: &str) -> Result<Rect> {
    let parts: Vec<usize> = value
        .split(',')
        .map(|p| parse(key, p.trim()))
        .collect::<Result<_>>()?;
    match parts[..] {
        [x, y, w, h] => Ok(Rect::new(x, y, w, h)),
        _ => Err(HarnessError::Config(format!(
            "{key} needs x,y,w,h, got {value:?}"
        ))),
    }
}

fn rect_text(r: Rect) -> String {
    format!("{},{},{},{}", r.x, r.y, r.w, r.h)
}

impl PipelineConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let t = &mut self.training;
        match key.trim() {
            "seed" => self.seed = parse(key, v)?,
            "detector" => {
                self.detector = match v {
                    "off" => DetectorMode::Off,
                    "cascade" => DetectorMode::Cascade,
                    _ => {
                        return Err(HarnessError::Config(format!(
                            "detector must be off|cascade, got {v:?}"
                        )))
                    }
                }
            }
            "cascade" => self.cascade_path = (!v.is_empty()).then(|| PathBuf::from(v)),
            "scale_factor" => self.scan.scale_factor = parse(key, v)?,
            "step_frac" => self.scan.step_frac = parse(key, v)?,
            "group_iou" => self.scan.group_iou = parse(key, v)?,
            "min_neighbors" => self.scan.min_neighbors = parse(key, v)?,
            "spatial_sigma" => self.preprocess.spatial_sigma = parse(key, v)?,
            "range_sigma" => self.preprocess.range_sigma = parse(key, v)?,
            "clahe_tiles" => self.preprocess.tiles = parse(key, v)?,
            "clip_limit" => self.preprocess.clip_limit = parse(key, v)?,
            "low_light_threshold" => self.preprocess.low_light_threshold = parse(key, v)?,
            "low_light" => self.preprocess.low_light = v.parse().map_err(HarnessError::Config)?,
            "face_side" => self.geometry.face_side = parse(key, v)?,
            "eye_roi" => self.geometry.eye = parse_rect(key, v)?,
            "mouth_roi" => self.geometry.mouth = parse_rect(key, v)?,
            "pca_variance" => t.pca_variance = parse(key, v)?,
            "pca_components" => t.pca_components = parse(key, v)?,
            "svm_c" => t.svm_c = parse(key, v)?,
            "svm_kernel" => {
                t.linear = match v {
                    "linear" => true,
                    "rbf" => false,
                    _ => {
                        return Err(HarnessError::Config(format!(
                            "svm_kernel must be linear|rbf, got {v:?}"
                        )))
                    }
                }
            }
            "svm_gamma" => {
                t.gamma = if v == "auto" {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "svm_tol" => t.tol = parse(key, v)?,
            "svm_max_passes" => t.max_passes = parse(key, v)?,
            "folds" => self.folds = parse(key, v)?,
            "t_low" => self.alert.t_low = parse(key, v)?,
            "t_high" => self.alert.t_high = parse(key, v)?,
            "alarm_duration" => self.alert.alarm_duration = parse(key, v)?,
            "high_persist" => self.alert.high_persist = parse(key, v)?,
            "water_spray" => self.alert.water_spray_enabled = parse_bool(key, v)?,
            "sample_period" => self.alert.sample_period = parse(key, v)?,
            "realarm_on_recheck" => self.alert.realarm_on_recheck = parse_bool(key, v)?,
            "treat_no_face_as_fatigued" => {
                self.no_face = if parse_bool(key, v)? {
                    NoFacePolicy::TreatAsFatigued
                } else {
                    NoFacePolicy::Skip
                }
            }
            other => return Err(HarnessError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a config file's text on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected `key = value`", i + 1))
            })?;
            self.set(k, v)
                .map_err(|e| HarnessError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.detector == DetectorMode::Cascade && self.cascade_path.is_none() {
            return Err(HarnessError::Config(
                "detector = cascade needs a cascade path".into(),
            ));
        }
        if self.folds < 2 {
            return Err(HarnessError::Config(format!(
                "folds must be >= 2, got {}",
                self.folds
            )));
        }
        self.geometry.validate()?;
        self.training.validate()?;
        self.alert.validate()?;
        Ok(())
    }

    /// Every setting, one `key = value` per line; parses back to `self`.
    pub fn to_text(&self) -> String {
        let t = &self.training;
        let p = &self.preprocess;
        let a = &self.alert;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        kv("seed", self.seed.to_string());
        kv(
            "detector",
            match self.detector {
                DetectorMode::Off => "off",
                DetectorMode::Cascade => "cascade",
            }
            .into(),
        );
        kv(
            "cascade",
            self.cascade_path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        kv("scale_factor", format!("{:?}", self.scan.scale_factor));
        kv("step_frac", format!("{:?}", self.scan.step_frac));
        kv("group_iou", format!("{:?}", self.scan.group_iou));
        kv("min_neighbors", self.scan.min_neighbors.to_string());
        kv("spatial_sigma", format!("{:?}", p.spatial_sigma));
        kv("range_sigma", format!("{:?}", p.range_sigma));
        kv("clahe_tiles", p.tiles.to_string());
        kv("clip_limit", format!("{:?}", p.clip_limit));
        kv(
            "low_light_threshold",
            format!("{:?}", p.low_light_threshold),
        );
        kv("low_light", p.low_light.to_string());
        kv("face_side", self.geometry.face_side.to_string());
        kv("eye_roi", rect_text(self.geometry.eye));
        kv("mouth_roi", rect_text(self.geometry.mouth));
        kv("pca_variance", format!("{:?}", t.pca_variance));
        kv("pca_components", t.pca_components.to_string());
        kv("svm_c", format!("{:?}", t.svm_c));
        kv("svm_kernel", if t.linear { "linear" } else { "rbf" }.into());
        kv(
            "svm_gamma",
            t.gamma.map_or("auto".into(), |g| format!("{g:?}")),
        );
        kv("svm_tol", format!("{:?}", t.tol));
        kv("svm_max_passes", t.max_passes.to_string());
        kv("folds", self.folds.to_string());
        kv("t_low", a.t_low.to_string());
        kv("t_high", a.t_high.to_string());
        kv("alarm_duration", format!("{:?}", a.alarm_duration));
        kv("high_persist", format!("{:?}", a.high_persist));
        kv("water_spray", a.water_spray_enabled.to_string());
        kv("sample_period", format!("{:?}", a.sample_period));
        kv("realarm_on_recheck", a.realarm_on_recheck.to_string());
        kv(
            "treat_no_face_as_fatigued",
            (self.no_face == NoFacePolicy::TreatAsFatigued).to_string(),
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn comments_and_overrides() {
        let c = PipelineConfig::from_text(
            "# thresholds\nt_low = 3   # low band\nt_high=9\nsvm_kernel = linear\neye_roi = 5,5,20,10\n",
        )
        .unwrap();
        assert_eq!((c.alert.t_low, c.alert.t_high), (3, 9));
        assert!(c.training.linear);
        assert_eq!(c.geometry.eye, Rect::new(5, 5, 20, 10));
    }

    #[test]
    fn errors_name_the_line() {
        let e = PipelineConfig::from_text("seed = 1\nbogus = 2\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(PipelineConfig::from_text("detector = cascade\n").is_err());
        assert!(PipelineConfig::from_text("t_low = 20\n").is_err());
        assert!(PipelineConfig::from_text("no equals sign\n").is_err());
    }
}

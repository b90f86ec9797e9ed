use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::{DetectorMode, NoFacePolicy, PipelineConfig};
use super::{Frame, HarnessError, LabeledFrame, Result};
use crate::classifier::{
    load_svm, save_svm, svm_decision, svm_train, ClassLabel, ClassifierError, KernelSpec, SvmModel,
    SvmParams,
};
use crate::detector::{detect, load_cascade, save_cascade, Cascade, DetectorError, ScanConfig};
use crate::fatigue::{AlertConfig, FatigueMonitor, Trace};
use crate::features::{
    assemble, extract_rois, load_pca, normalize_face, pca_fit, pca_project, save_pca,
    ComponentSpec, FeaturesError, PcaModel, RoiGeometry,
};
use crate::imaging::{preprocess, LowLightMode, PreprocessConfig, Rect};

/// Hyperparameters for the PCA and SVM stages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSettings {
    /// Fixed component count; 0 selects by explained variance.
    pub pca_components: usize,
    pub pca_variance: f64,
    pub svm_c: f64,
    pub linear: bool,
    /// RBF width; `None` derives it from the projected training data.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        Self {
            pca_components: 0,
            pca_variance: 0.95,
            svm_c: 1.0,
            linear: false,
            gamma: None,
            tol: 1e-3,
            max_passes: 200,
        }
    }
}

impl TrainingSettings {
    pub fn component_spec(&self) -> ComponentSpec {
        if self.pca_components > 0 {
            ComponentSpec::Count(self.pca_components)
        } else {
            ComponentSpec::Variance(self.pca_variance)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.pca_components == 0 && !(self.pca_variance > 0.0 && self.pca_variance <= 1.0) {
            return bad(format!(
                "pca_variance must lie in (0, 1], got {}",
                self.pca_variance
            ));
        }
        if !(self.svm_c > 0.0 && self.svm_c.is_finite()) {
            return bad(format!("svm_c must be positive, got {}", self.svm_c));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return bad(format!("svm_gamma must be positive, got {g}"));
            }
        }
        if !(self.tol > 0.0) || self.max_passes == 0 {
            return bad("svm_tol and svm_max_passes must be positive".into());
        }
        Ok(())
    }

    /// SVM parameters for a given projected training matrix.
    pub fn svm_params<S: AsRef<[f64]>>(&self, projected: &[S]) -> SvmParams {
        let kernel = if self.linear {
            KernelSpec::Linear
        } else {
            match self.gamma {
                Some(gamma) => KernelSpec::Rbf { gamma },
                None => KernelSpec::rbf_scaled(projected),
            }
        };
        SvmParams {
            c: self.svm_c,
            kernel,
            tol: self.tol,
            max_passes: self.max_passes,
        }
    }
}

/// Frame to feature vector: preprocessing, face localisation and ROI assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct Extractor {
    pub geometry: RoiGeometry,
    pub preprocess: PreprocessConfig,
    pub cascade: Option<Cascade>,
    pub scan: ScanConfig,
}

impl Extractor {
    pub fn from_config(config: &PipelineConfig, cascade: Option<Cascade>) -> Result<Self> {
        let cascade = match config.detector {
            DetectorMode::Off => None,
            DetectorMode::Cascade => Some(cascade.ok_or_else(|| {
                HarnessError::Config("detector = cascade but no cascade was supplied".into())
            })?),
        };
        Ok(Self {
            geometry: config.geometry,
            preprocess: config.preprocess.clone(),
            cascade,
            scan: config.scan,
        })
    }

    /// Face box for a preprocessed frame: the largest detection when a
    /// cascade is present, otherwise the known box or the whole frame.
    fn locate(&self, frame: &Frame, pre: &crate::imaging::Image) -> Result<Option<Rect>> {
        match &self.cascade {
            Some(c) => {
                let boxes = match detect(pre, c, &self.scan) {
                    Err(DetectorError::ImageTooSmall { .. }) => return Ok(None),
                    other => other?,
                };
                let mut best: Option<Rect> = None;
                for b in boxes {
                    if best.is_none_or(|r| b.rect.area() > r.area()) {
                        best = Some(b.rect);
                    }
                }
                Ok(best)
            }
            None => Ok(Some(frame.face.unwrap_or(Rect::new(
                0,
                0,
                pre.width(),
                pre.height(),
            )))),
        }
    }

    /// Feature vector of length `geometry.feature_len()`, or None when no
    /// face is found.
    pub fn extract(&self, frame: &Frame) -> Result<Option<Vec<f64>>> {
        let pre = preprocess(&frame.image, &self.preprocess)?;
        let Some(rect) = self.locate(frame, &pre)? else {
            return Ok(None);
        };
        let face = normalize_face(&pre, rect, self.geometry.face_side)?;
        let (eye, mouth) = extract_rois(&face, &self.geometry)?;
        Ok(Some(assemble(&eye, &mouth, &self.geometry)?.into_vec()))
    }

    /// Extracts every frame concurrently; output is in input order.
    pub fn extract_all<'a, I>(&self, frames: I) -> Result<Vec<Option<Vec<f64>>>>
    where
        I: IntoParallelIterator<Item = &'a Frame>,
        I::Iter: IndexedParallelIterator,
    {
        frames.into_par_iter().map(|f| self.extract(f)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineModel {
    pub extractor: Extractor,
    pub training: TrainingSettings,
    pub pca: PcaModel,
    pub svm: SvmModel,
}

impl PipelineModel {
    pub fn check(&self) -> Result<()> {
        let len = self.extractor.geometry.feature_len();
        if self.pca.dim() != len {
            return Err(HarnessError::ModelMismatch(format!(
                "PCA expects {} inputs but the geometry yields {len}",
                self.pca.dim()
            )));
        }
        if self.svm.dim() != self.pca.k() {
            return Err(HarnessError::ModelMismatch(format!(
                "SVM expects {} inputs but PCA yields {}",
                self.svm.dim(),
                self.pca.k()
            )));
        }
        Ok(())
    }

    /// Decision value for an extracted feature vector.
    pub fn decision(&self, features: &[f64]) -> Result<f64> {
        let z = pca_project(&self.pca, features)?;
        Ok(svm_decision(&self.svm, &z)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub model: PipelineModel,
    /// Frames dropped because no face was found.
    pub skipped: usize,
    pub training_accuracy: f64,
}

fn both_classes<'a>(labels: impl IntoIterator<Item = &'a ClassLabel>) -> bool {
    let mut seen = [false; 2];
    for l in labels {
        seen[(*l == ClassLabel::Fatigued) as usize] = true;
    }
    seen[0] && seen[1]
}

pub(crate) fn fit_features(
    feats: &[&[f64]],
    labels: &[ClassLabel],
    settings: &TrainingSettings,
) -> Result<(PcaModel, SvmModel)> {
    let pca = pca_fit(feats, settings.component_spec())?;
    let z: Vec<Vec<f64>> = feats
        .iter()
        .map(|v| pca_project(&pca, v))
        .collect::<std::result::Result<_, FeaturesError>>()?;
    let params = settings.svm_params(&z);
    let svm = svm_train(&z, labels, &params)?;
    Ok((pca, svm))
}

/// Trains the full pipeline: extract features from every frame (skipping
/// frames without a face), fit PCA, project, train the SVM.
pub fn fit_pipeline(
    frames: &[LabeledFrame],
    config: &PipelineConfig,
    cascade: Option<Cascade>,
) -> Result<FitOutcome> {
    config.validate()?;
    if !both_classes(frames.iter().map(|f| &f.label)) {
        return Err(HarnessError::SingleClass);
    }
    let extractor = Extractor::from_config(config, cascade)?;
    let extracted = extractor.extract_all(frames.par_iter().map(|f| &f.frame))?;
    let mut feats: Vec<&[f64]> = Vec::new();
    let mut labels = Vec::new();
    for (f, e) in frames.iter().zip(&extracted) {
        if let Some(v) = e {
            feats.push(v);
            labels.push(f.label);
        }
    }
    let skipped = frames.len() - feats.len();
    if feats.is_empty() {
        return Err(HarnessError::NoFacesFound);
    }
    if skipped > 0 {
        log::warn!(
            "{skipped} of {} frames had no face and were skipped",
            frames.len()
        );
    }
    if !both_classes(&labels) {
        return Err(HarnessError::SingleClass);
    }
    let (pca, svm) = fit_features(&feats, &labels, &config.training)?;
    let model = PipelineModel {
        extractor,
        training: config.training,
        pca,
        svm,
    };
    let correct = feats
        .iter()
        .zip(&labels)
        .map(|(v, l)| {
            model
                .decision(v)
                .map(|d| crate::classifier::label_for_decision(d) == *l)
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&ok| ok)
        .count();
    let training_accuracy = correct as f64 / feats.len() as f64;
    log::info!(
        "trained on {} frames: {} components, {} support vectors, training accuracy {training_accuracy:.4}",
        feats.len(),
        model.pca.k(),
        model.svm.support_vectors.len()
    );
    Ok(FitOutcome {
        model,
        skipped,
        training_accuracy,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamResult {
    pub trace: Trace,
    /// Classifier output per frame; `None` for skipped frames.
    pub labels: Vec<Option<ClassLabel>>,
    pub decisions: Vec<Option<f64>>,
    pub skipped: usize,
}

impl StreamResult {
    /// The fatigue trace with a `FRAME <index> <label|skip>` line before each tick.
    pub fn to_text(&self) -> String {
        self.trace.render(|i| {
            Some(format!(
                "FRAME {i} {}",
                self.labels[i].map_or("skip".to_string(), |l| l.to_string())
            ))
        })
    }
}

/// Runs frames through the trained pipeline and the alert unit.
pub fn infer_stream(
    model: &PipelineModel,
    frames: &[Frame],
    alert: &AlertConfig,
    policy: NoFacePolicy,
) -> Result<StreamResult> {
    model.check()?;
    let decisions: Vec<Option<f64>> = frames
        .par_iter()
        .map(|f| match model.extractor.extract(f)? {
            Some(v) => model.decision(&v).map(Some),
            None => Ok(None),
        })
        .collect::<Result<_>>()?;
    let mut monitor = FatigueMonitor::new(*alert)?;
    let mut labels = Vec::with_capacity(frames.len());
    let mut skipped = 0;
    for d in &decisions {
        let label = match d {
            Some(v) => Some(crate::classifier::label_for_decision(*v)),
            None => {
                skipped += 1;
                match policy {
                    NoFacePolicy::Skip => None,
                    NoFacePolicy::TreatAsFatigued => Some(ClassLabel::Fatigued),
                }
            }
        };
        monitor.push(label);
        labels.push(label);
    }
    if skipped > 0 {
        log::warn!(
            "{skipped} of {} frames had no detectable face",
            frames.len()
        );
    }
    Ok(StreamResult {
        trace: monitor.into_trace(),
        labels,
        decisions,
        skipped,
    })
}

// PIPE1 composite format:
//
//   PIPE1
//   SECTION <name> <line count>
//   ...section body...
//
// Sections, in order: geometry, preprocess, training, scan, [cascade], pca, svm.

fn section(out: &mut String, name: &str, body: &str) {
    writeln!(out, "SECTION {name} {}", body.lines().count()).unwrap();
    out.push_str(body);
    if !body.ends_with('\n') {
        out.push('\n');
    }
}

pub fn save_pipeline(model: &PipelineModel) -> String {
    let g = &model.extractor.geometry;
    let p = &model.extractor.preprocess;
    let t = &model.training;
    let s = &model.extractor.scan;
    let r = |r: Rect| format!("{},{},{},{}", r.x, r.y, r.w, r.h);
    let mut out = String::from("PIPE1\n");
    section(
        &mut out,
        "geometry",
        &format!(
            "face_side {} eye {} mouth {}\n",
            g.face_side,
            r(g.eye),
            r(g.mouth)
        ),
    );
    section(
        &mut out,
        "preprocess",
        &format!(
            "spatial_sigma {:?} range_sigma {:?} tiles {} clip_limit {:?} low_light_threshold {:?} low_light {}\n",
            p.spatial_sigma, p.range_sigma, p.tiles, p.clip_limit, p.low_light_threshold, p.low_light
        ),
    );
    section(
        &mut out,
        "training",
        &format!(
            "pca_components {} pca_variance {:?} svm_c {:?} kernel {} gamma {} tol {:?} max_passes {}\n",
            t.pca_components,
            t.pca_variance,
            t.svm_c,
            if t.linear { "linear" } else { "rbf" },
            t.gamma.map_or("auto".to_string(), |g| format!("{g:?}")),
            t.tol,
            t.max_passes
        ),
    );
    section(
        &mut out,
        "scan",
        &format!(
            "scale_factor {:?} step_frac {:?} group_iou {:?} min_neighbors {}\n",
            s.scale_factor, s.step_frac, s.group_iou, s.min_neighbors
        ),
    );
    if let Some(c) = &model.extractor.cascade {
        section(&mut out, "cascade", &save_cascade(c));
    }
    section(&mut out, "pca", &save_pca(&model.pca));
    section(&mut out, "svm", &save_svm(&model.svm));
    out
}

struct Section<'a> {
    name: &'a str,
    /// 1-based line number of the first body line.
    start: usize,
    body: String,
}

fn perr(line: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Parse {
        line,
        message: message.into(),
    }
}

fn split_sections(text: &str) -> Result<Vec<Section<'_>>> {
    let lines: Vec<&str> = text.lines().collect();
    match lines.first().map(|l| l.trim()) {
        Some("PIPE1") => {}
        Some(other) => return Err(HarnessError::VersionMismatch(other.to_string())),
        None => return Err(perr(1, "empty input")),
    }
    let mut out = Vec::new();
    let mut i = 1;
    while i < lines.len() {
        let toks: Vec<&str> = lines[i].split_whitespace().collect();
        let (name, count) = match toks[..] {
            ["SECTION", name, n] => (
                name,
                n.parse::<usize>()
                    .map_err(|_| perr(i + 1, format!("bad line count {n:?}")))?,
            ),
            [] => {
                i += 1;
                continue;
            }
            _ => return Err(perr(i + 1, "expected `SECTION <name> <lines>`")),
        };
        if i + 1 + count > lines.len() {
            return Err(perr(
                lines.len() + 1,
                format!("section {name} is truncated"),
            ));
        }
        let mut body = lines[i + 1..i + 1 + count].join("\n");
        body.push('\n');
        out.push(Section {
            name,
            start: i + 2,
            body,
        });
        i += 1 + count;
    }
    Ok(out)
}

/// `key value key value ...` on a single line.
fn fields<'a>(sec: &'a Section<'_>, keys: &[&str]) -> Result<Vec<&'a str>> {
    let toks: Vec<&str> = sec.body.split_whitespace().collect();
    if toks.len() != 2 * keys.len() {
        return Err(perr(
            sec.start,
            format!("{} section has the wrong shape", sec.name),
        ));
    }
    let mut vals = Vec::with_capacity(keys.len());
    for (pair, key) in toks.chunks(2).zip(keys) {
        if pair[0] != *key {
            return Err(perr(
                sec.start,
                format!("expected key {key}, found {}", pair[0]),
            ));
        }
        vals.push(pair[1]);
    }
    Ok(vals)
}

fn num<T: std::str::FromStr>(sec: &Section<'_>, v: &str) -> Result<T> {
    v.parse().map_err(|_| {
        perr(
            sec.start,
            format!("bad value {v:?} in {} section", sec.name),
        )
    })
}

fn rect(sec: &Section<'_>, v: &str) -> Result<Rect> {
    let p: Vec<usize> = v.split(',').map(|x| num(sec, x)).collect::<Result<_>>()?;
    match p[..] {
        [x, y, w, h] => Ok(Rect::new(x, y, w, h)),
        _ => Err(perr(sec.start, format!("bad rectangle {v:?}"))),
    }
}

fn shift_line(e: HarnessError, start: usize) -> HarnessError {
    let relocate = |line: usize, message: String| perr(start + line - 1, message);
    match e {
        HarnessError::Detector(DetectorError::Parse { line, message })
        | HarnessError::Features(FeaturesError::Parse { line, message })
        | HarnessError::Classifier(ClassifierError::Parse { line, message }) => {
            relocate(line, message)
        }
        other => other,
    }
}

pub fn load_pipeline(text: &str) -> Result<PipelineModel> {
    let sections = split_sections(text)?;
    let names: Vec<&str> = sections.iter().map(|s| s.name).collect();
    let expected: &[&str] = if names.contains(&"cascade") {
        &[
            "geometry",
            "preprocess",
            "training",
            "scan",
            "cascade",
            "pca",
            "svm",
        ]
    } else {
        &["geometry", "preprocess", "training", "scan", "pca", "svm"]
    };
    if names != expected {
        return Err(HarnessError::ModelMismatch(format!(
            "expected sections {expected:?}, found {names:?}"
        )));
    }
    let get = |n: &str| {
        sections
            .iter()
            .find(|s| s.name == n)
            .expect("checked above")
    };

    let sec = get("geometry");
    let v = fields(sec, &["face_side", "eye", "mouth"])?;
    let geometry = RoiGeometry::new(num(sec, v[0])?, rect(sec, v[1])?, rect(sec, v[2])?)?;

    let sec = get("preprocess");
    let v = fields(
        sec,
        &[
            "spatial_sigma",
            "range_sigma",
            "tiles",
            "clip_limit",
            "low_light_threshold",
            "low_light",
        ],
    )?;
    let preprocess = PreprocessConfig {
        spatial_sigma: num(sec, v[0])?,
        range_sigma: num(sec, v[1])?,
        tiles: num(sec, v[2])?,
        clip_limit: num(sec, v[3])?,
        low_light_threshold: num(sec, v[4])?,
        low_light: v[5]
            .parse::<LowLightMode>()
            .map_err(|m| perr(sec.start, m))?,
    };

    let sec = get("training");
    let v = fields(
        sec,
        &[
            "pca_components",
            "pca_variance",
            "svm_c",
            "kernel",
            "gamma",
            "tol",
            "max_passes",
        ],
    )?;
    let training = TrainingSettings {
        pca_components: num(sec, v[0])?,
        pca_variance: num(sec, v[1])?,
        svm_c: num(sec, v[2])?,
        linear: match v[3] {
            "linear" => true,
            "rbf" => false,
            k => return Err(perr(sec.start, format!("bad kernel {k:?}"))),
        },
        gamma: if v[4] == "auto" {
            None
        } else {
            Some(num(sec, v[4])?)
        },
        tol: num(sec, v[5])?,
        max_passes: num(sec, v[6])?,
    };

    let sec = get("scan");
    let v = fields(
        sec,
        &["scale_factor", "step_frac", "group_iou", "min_neighbors"],
    )?;
    let scan = ScanConfig {
        scale_factor: num(sec, v[0])?,
        step_frac: num(sec, v[1])?,
        group_iou: num(sec, v[2])?,
        min_neighbors: num(sec, v[3])?,
    };

    let cascade = match sections.iter().find(|s| s.name == "cascade") {
        Some(sec) => Some(load_cascade(&sec.body).map_err(|e| shift_line(e.into(), sec.start))?),
        None => None,
    };
    let sec = get("pca");
    let pca = load_pca(&sec.body).map_err(|e| shift_line(e.into(), sec.start))?;
    let sec = get("svm");
    let svm = load_svm(&sec.body).map_err(|e| shift_line(e.into(), sec.start))?;

    let model = PipelineModel {
        extractor: Extractor {
            geometry,
            preprocess,
            cascade,
            scan,
        },
        training,
        pca,
        svm,
    };
    model.check()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synth::{synth_frames, SyntheticSpec};

    fn tiny_model() -> PipelineModel {
        let spec = SyntheticSpec {
            n_frames: 24,
            seed: 11,
            ..Default::default()
        };
        let frames: Vec<LabeledFrame> = synth_frames(&spec)
            .unwrap()
            .iter()
            .map(|f| f.to_labeled())
            .collect();
        fit_pipeline(&frames, &PipelineConfig::default(), None)
            .unwrap()
            .model
    }

    #[test]
    fn pipe_round_trip() {
        let m = tiny_model();
        let text = save_pipeline(&m);
        let back = load_pipeline(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(save_pipeline(&back), text);
    }

    #[test]
    fn pipe_errors() {
        let text = save_pipeline(&tiny_model());
        assert!(matches!(
            load_pipeline(&text.replacen("PIPE1", "PIPE2", 1)),
            Err(HarnessError::VersionMismatch(_))
        ));
        let no_svm: String = text.split("SECTION svm").next().unwrap().to_string();
        assert!(matches!(
            load_pipeline(&no_svm),
            Err(HarnessError::ModelMismatch(_))
        ));
        let bad = text.replacen("SVM1 ", "SVM1 x", 1);
        let e = load_pipeline(&bad).unwrap_err();
        assert!(e.is_model_error(), "{e}");
    }

    #[test]
    fn single_class_rejected() {
        let spec = SyntheticSpec {
            n_frames: 6,
            fraction_fatigued: 0.0,
            ..Default::default()
        };
        let frames: Vec<LabeledFrame> = synth_frames(&spec)
            .unwrap()
            .iter()
            .map(|f| f.to_labeled())
            .collect();
        assert!(matches!(
            fit_pipeline(&frames, &PipelineConfig::default(), None),
            Err(HarnessError::SingleClass)
        ));
    }

    #[test]
    fn empty_stream() {
        let m = tiny_model();
        let r = infer_stream(&m, &[], &AlertConfig::default(), NoFacePolicy::Skip).unwrap();
        assert!(r.trace.ticks.is_empty() && r.labels.is_empty());
    }
}

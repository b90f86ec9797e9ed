//! CSV manifests: `path,label[,group[,x,y,w,h]]`, one record per line.
//!
//! A first line whose label field is not an integer is treated as a header.
//! Blank lines and lines starting with `#` are ignored. Relative paths are
//! resolved against the manifest's directory. The optional trailing four
//! columns give a known face box.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{Frame, HarnessError, LabeledFrame, Result};
use crate::classifier::ClassLabel;
use crate::imaging::{load_pnm, Rect};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    pub path: PathBuf,
    pub label: ClassLabel,
    pub group: Option<String>,
    pub face: Option<Rect>,
}

fn parse_label(field: &str, line: usize) -> Result<ClassLabel> {
    let bad = || HarnessError::BadLabel {
        line,
        value: field.to_string(),
    };
    let v: i64 = field.parse().map_err(|_| bad())?;
    ClassLabel::from_value(v).ok_or_else(bad)
}

/// Parses manifest text; paths are joined onto `base_dir` when relative.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<ManifestRecord>> {
    let mut records = Vec::new();
    let mut first = true;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let is_first = std::mem::replace(&mut first, false);
        if fields.len() < 2 {
            return Err(HarnessError::BadRecord {
                line,
                message: "expected at least `path,label`".into(),
            });
        }
        if is_first && fields[1].parse::<i64>().is_err() {
            continue;
        }
        let label = parse_label(fields[1], line)?;
        let group = fields
            .get(2)
            .filter(|g| !g.is_empty())
            .map(|g| g.to_string());
        let face = match fields.len() {
            2 | 3 => None,
            7 => {
                let mut n = [0usize; 4];
                for (slot, f) in n.iter_mut().zip(&fields[3..]) {
                    *slot = f.parse().map_err(|_| HarnessError::BadRecord {
                        line,
                        message: format!("bad face box value {f:?}"),
                    })?;
                }
                if n[2] == 0 || n[3] == 0 {
                    return Err(HarnessError::BadRecord {
                        line,
                        message: "face box must have positive size".into(),
                    });
                }
                Some(Rect::new(n[0], n[1], n[2], n[3]))
            }
            k => {
                return Err(HarnessError::BadRecord {
                    line,
                    message: format!("expected 2, 3 or 7 fields, found {k}"),
                })
            }
        };
        let path = Path::new(fields[0]);
        records.push(ManifestRecord {
            path: if path.is_absolute() {
                path.to_path_buf()
            } else {
                base_dir.join(path)
            },
            label,
            group,
            face,
        });
    }
    if records.is_empty() {
        return Err(HarnessError::EmptyManifest);
    }
    Ok(records)
}

/// Reads a manifest file and checks that every referenced image exists.
pub fn ingest(manifest_path: &Path) -> Result<Vec<ManifestRecord>> {
    let text = fs::read_to_string(manifest_path).map_err(|e| HarnessError::io(manifest_path, e))?;
    let base = manifest_path.parent().unwrap_or(Path::new(""));
    let records = parse_manifest(&text, base)?;
    if let Some(r) = records.iter().find(|r| !r.path.is_file()) {
        return Err(HarnessError::MissingFile(r.path.clone()));
    }
    Ok(records)
}

/// Renders records with a header line. Paths are written as stored.
pub fn write_manifest(records: &[ManifestRecord]) -> String {
    let mut out = String::from("path,label,group,x,y,w,h\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{}",
            r.path.display(),
            r.label,
            r.group.as_deref().unwrap_or("")
        ));
        if let Some(f) = r.face {
            out.push_str(&format!(",{},{},{},{}", f.x, f.y, f.w, f.h));
        }
        out.push('\n');
    }
    out
}

/// Loads every referenced image, in manifest order.
pub fn load_frames(records: &[ManifestRecord]) -> Result<Vec<LabeledFrame>> {
    records
        .par_iter()
        .map(|r| {
            let bytes = fs::read(&r.path).map_err(|e| {
                if e.kind() == std::io::ErrorKind::NotFound {
                    HarnessError::MissingFile(r.path.clone())
                } else {
                    HarnessError::io(&r.path, e)
                }
            })?;
            let image = load_pnm(&bytes).map_err(|source| HarnessError::Image {
                path: r.path.clone(),
                source,
            })?;
            Ok(LabeledFrame {
                frame: Frame {
                    image,
                    face: r.face,
                },
                label: r.label,
                group: r.group.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_records_with_optional_header() {
        let base = Path::new("/data/set");
        let r = parse_manifest("a.pgm,+1\nb.pgm,-1\n", base).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].path, Path::new("/data/set/a.pgm"));
        assert_eq!(r[0].label, ClassLabel::Fatigued);
        assert_eq!(r[1].label, ClassLabel::Alert);
        let h = parse_manifest("path,label,group\n/abs/a.pgm,1,s1\n", base).unwrap();
        assert_eq!(h[0].path, Path::new("/abs/a.pgm"));
        assert_eq!(h[0].group.as_deref(), Some("s1"));
    }

    #[test]
    fn bad_label_names_line() {
        let err = parse_manifest("a.pgm,1\nb.pgm,2\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, HarnessError::BadLabel { line: 2, ref value } if value == "2"));
        assert!(matches!(
            parse_manifest("# nothing\n\n", Path::new(".")),
            Err(HarnessError::EmptyManifest)
        ));
    }

    #[test]
    fn face_box_round_trip() {
        let recs = vec![ManifestRecord {
            path: "f.pgm".into(),
            label: ClassLabel::Alert,
            group: Some("s3".into()),
            face: Some(Rect::new(1, 2, 30, 40)),
        }];
        let text = write_manifest(&recs);
        assert_eq!(parse_manifest(&text, Path::new("")).unwrap(), recs);
        assert!(matches!(
            parse_manifest("a.pgm,1,g,1,2\n", Path::new("")),
            Err(HarnessError::BadRecord { line: 1, .. })
        ));
    }
}

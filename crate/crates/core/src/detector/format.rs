//! CASCADE1 text format.
//!
//! ```text
//! CASCADE1 <base_w> <base_h> <n_stages>
//! STAGE <n_weak> <stage_threshold>
//! WEAK <kind> <x> <y> <w> <h> <threshold> <polarity> <alpha>
//! ```

use std::fmt::Write as _;

use super::cascade::{Cascade, Stage, WeakClassifier};
use super::haar::{FeatureKind, HaarFeature};
use super::{DetectorError, Result};
use crate::imaging::Rect;

pub fn save_cascade(cascade: &Cascade) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "CASCADE1 {} {} {}",
        cascade.base_w,
        cascade.base_h,
        cascade.stages.len()
    )
    .unwrap();
    for stage in &cascade.stages {
        writeln!(out, "STAGE {} {:?}", stage.weak.len(), stage.threshold).unwrap();
        for (wc, alpha) in &stage.weak {
            let r = wc.feature.rect;
            writeln!(
                out,
                "WEAK {} {} {} {} {} {:?} {} {:?}",
                wc.feature.kind.token(),
                r.x,
                r.y,
                r.w,
                r.h,
                wc.threshold,
                wc.polarity,
                alpha
            )
            .unwrap();
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    /// Next non-blank line as (1-based line number, tokens).
    fn next(&mut self, expecting: &str) -> Result<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if !toks.is_empty() {
                return Ok((i + 1, toks));
            }
        }
        Err(DetectorError::Parse {
            line: self.last + 1,
            message: format!("unexpected end of input, expected {expecting}"),
        })
    }
}

fn field<T: std::str::FromStr>(toks: &[&str], idx: usize, line: usize, what: &str) -> Result<T> {
    toks.get(idx)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| DetectorError::Parse {
            line,
            message: format!("invalid or missing {what}"),
        })
}

fn expect_arity(toks: &[&str], n: usize, line: usize) -> Result<()> {
    if toks.len() != n {
        return Err(DetectorError::Parse {
            line,
            message: format!("expected {n} fields, found {}", toks.len()),
        });
    }
    Ok(())
}

pub fn load_cascade(text: &str) -> Result<Cascade> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (ln, head) = lines.next("CASCADE1 header")?;
    if head[0] != "CASCADE1" {
        return Err(DetectorError::VersionMismatch(head[0].to_string()));
    }
    expect_arity(&head, 4, ln)?;
    let base_w: usize = field(&head, 1, ln, "base width")?;
    let base_h: usize = field(&head, 2, ln, "base height")?;
    let n_stages: usize = field(&head, 3, ln, "stage count")?;

    let mut stages = Vec::with_capacity(n_stages);
    for _ in 0..n_stages {
        let (ln, st) = lines.next("STAGE line")?;
        if st[0] != "STAGE" {
            return Err(DetectorError::Parse {
                line: ln,
                message: format!("expected STAGE, found {:?}", st[0]),
            });
        }
        expect_arity(&st, 3, ln)?;
        let n_weak: usize = field(&st, 1, ln, "weak count")?;
        let threshold: f64 = field(&st, 2, ln, "stage threshold")?;
        let mut weak = Vec::with_capacity(n_weak);
        for _ in 0..n_weak {
            let (ln, wk) = lines.next("WEAK line")?;
            if wk[0] != "WEAK" {
                return Err(DetectorError::Parse {
                    line: ln,
                    message: format!("expected WEAK, found {:?}", wk[0]),
                });
            }
            expect_arity(&wk, 9, ln)?;
            let kind = FeatureKind::from_token(wk[1]).ok_or_else(|| DetectorError::Parse {
                line: ln,
                message: format!("unknown feature kind {:?}", wk[1]),
            })?;
            let rect = Rect::new(
                field(&wk, 2, ln, "x")?,
                field(&wk, 3, ln, "y")?,
                field(&wk, 4, ln, "w")?,
                field(&wk, 5, ln, "h")?,
            );
            let feature = HaarFeature::new(kind, rect).map_err(|e| DetectorError::Parse {
                line: ln,
                message: e.to_string(),
            })?;
            let wc = WeakClassifier {
                feature,
                threshold: field(&wk, 6, ln, "threshold")?,
                polarity: field(&wk, 7, ln, "polarity")?,
            };
            weak.push((wc, field(&wk, 8, ln, "alpha")?));
        }
        stages.push(
            Stage::new(weak, threshold).map_err(|e| DetectorError::Parse {
                line: ln,
                message: e.to_string(),
            })?,
        );
    }
    if let Ok((ln, extra)) = lines.next("") {
        return Err(DetectorError::Parse {
            line: ln,
            message: format!("trailing content starting with {:?}", extra[0]),
        });
    }
    Cascade::new(base_w, base_h, stages)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Cascade {
        let f = HaarFeature::new(FeatureKind::ThreeVertical, Rect::new(2, 0, 4, 6)).unwrap();
        let g = HaarFeature::new(FeatureKind::Four, Rect::new(0, 2, 4, 4)).unwrap();
        let s1 = Stage::new(
            vec![(
                WeakClassifier {
                    feature: f,
                    threshold: 0.1 + 0.2,
                    polarity: -1,
                },
                1.0 / 3.0,
            )],
            0.123456789012345678,
        )
        .unwrap();
        let s2 = Stage::new(
            vec![
                (
                    WeakClassifier {
                        feature: g,
                        threshold: f64::NEG_INFINITY,
                        polarity: 1,
                    },
                    23.025850929940457,
                ),
                (
                    WeakClassifier {
                        feature: f,
                        threshold: -1e-300,
                        polarity: 1,
                    },
                    0.0,
                ),
            ],
            -2.5,
        )
        .unwrap();
        Cascade::new(8, 6, vec![s1, s2]).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let text = save_cascade(&c);
        assert!(text.starts_with("CASCADE1 8 6 2\nSTAGE 1 "));
        let back = load_cascade(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(save_cascade(&back), text);
    }

    #[test]
    fn version_mismatch() {
        let text = save_cascade(&sample()).replacen("CASCADE1", "CASCADE2", 1);
        assert_eq!(
            load_cascade(&text).unwrap_err(),
            DetectorError::VersionMismatch("CASCADE2".into())
        );
    }

    #[test]
    fn truncated_stage_names_line() {
        let text = save_cascade(&sample());
        let cut: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
        match load_cascade(&cut).unwrap_err() {
            DetectorError::Parse { line, .. } => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_tokens() {
        let text = save_cascade(&sample()).replace("WEAK 3V", "WEAK 5X");
        match load_cascade(&text).unwrap_err() {
            DetectorError::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("5X"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = save_cascade(&sample()).replace("STAGE 1", "STAGE one");
        assert!(matches!(
            load_cascade(&text),
            Err(DetectorError::Parse { line: 2, .. })
        ));
    }
}

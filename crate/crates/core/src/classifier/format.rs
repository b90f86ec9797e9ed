//! SVM1 text format.
//!
//! ```text
//! SVM1 <k> <m> <C> <kernel> [gamma]
//! <bias>
//! <dual_coef> <sv_1> ... <sv_k>      (m lines)
//! ```

use std::fmt::Write as _;

use super::{ClassifierError, KernelSpec, Result, SvmModel};

pub fn save_svm(model: &SvmModel) -> String {
    let mut out = String::new();
    write!(
        out,
        "SVM1 {} {} {:?}",
        model.dim(),
        model.support_vectors.len(),
        model.c
    )
    .unwrap();
    match model.kernel {
        KernelSpec::Linear => out.push_str(" linear\n"),
        KernelSpec::Rbf { gamma } => writeln!(out, " rbf {gamma:?}").unwrap(),
    }
    writeln!(out, "{:?}", model.bias).unwrap();
    for (coef, sv) in model.dual_coef.iter().zip(&model.support_vectors) {
        write!(out, "{coef:?}").unwrap();
        for v in sv {
            write!(out, " {v:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn err(line: usize, message: impl Into<String>) -> ClassifierError {
    ClassifierError::Parse {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(tok: Option<&&str>, line: usize, what: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| err(line, format!("invalid or missing {what}")))
}

pub fn load_svm(text: &str) -> Result<SvmModel> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (ln, head) = lines.next().ok_or_else(|| err(1, "empty input"))?;
    let toks: Vec<&str> = head.split_whitespace().collect();
    match toks.first() {
        Some(&"SVM1") => {}
        Some(other) => return Err(ClassifierError::VersionMismatch(other.to_string())),
        None => return Err(err(ln, "missing header")),
    }
    let k: usize = num(toks.get(1), ln, "dimension")?;
    let m: usize = num(toks.get(2), ln, "support vector count")?;
    let c: f64 = num(toks.get(3), ln, "C")?;
    let kernel = match toks.get(4).copied() {
        Some("linear") if toks.len() == 5 => KernelSpec::Linear,
        Some("rbf") if toks.len() == 6 => KernelSpec::Rbf {
            gamma: num(toks.get(5), ln, "gamma")?,
        },
        Some(other) => return Err(err(ln, format!("bad kernel specification {other:?}"))),
        None => return Err(err(ln, "missing kernel")),
    };
    kernel.validate().map_err(|e| err(ln, e.to_string()))?;
    if k == 0 || m == 0 || !(c > 0.0) {
        return Err(err(
            ln,
            "dimension, support vector count and C must be positive",
        ));
    }
    let (ln_b, bias_line) = lines
        .next()
        .ok_or_else(|| err(ln + 1, "missing bias line"))?;
    let bias: f64 = bias_line
        .trim()
        .parse()
        .map_err(|_| err(ln_b, format!("bad bias {:?}", bias_line.trim())))?;
    let mut support_vectors = Vec::with_capacity(m);
    let mut dual_coef = Vec::with_capacity(m);
    let mut last = ln_b;
    for _ in 0..m {
        let (ln_r, row) = lines
            .next()
            .ok_or_else(|| err(last + 1, "unexpected end of input in support vectors"))?;
        last = ln_r;
        let vals = row
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| err(ln_r, format!("bad number {t:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != k + 1 {
            return Err(err(
                ln_r,
                format!("expected {} values, found {}", k + 1, vals.len()),
            ));
        }
        dual_coef.push(vals[0]);
        support_vectors.push(vals[1..].to_vec());
    }
    Ok(SvmModel {
        support_vectors,
        dual_coef,
        bias,
        kernel,
        c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::svm_decision;

    fn model(kernel: KernelSpec) -> SvmModel {
        SvmModel {
            support_vectors: vec![vec![0.1, -0.2, 1.0 / 3.0], vec![5e-320, 2.0, -7.25]],
            dual_coef: vec![-0.7, 0.7],
            bias: -1.0 / 7.0,
            kernel,
            c: 1.0,
        }
    }

    #[test]
    fn round_trip() {
        for kernel in [KernelSpec::Linear, KernelSpec::Rbf { gamma: 0.1 + 0.2 }] {
            let m = model(kernel);
            let back = load_svm(&save_svm(&m)).unwrap();
            assert_eq!(back, m);
            let x = [0.3, 0.4, -0.5];
            assert_eq!(
                svm_decision(&back, &x).unwrap().to_bits(),
                svm_decision(&m, &x).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn parse_errors() {
        let text = save_svm(&model(KernelSpec::Linear));
        assert!(matches!(
            load_svm(&text.replace("linear", "poly")),
            Err(ClassifierError::Parse { line: 1, .. })
        ));
        assert_eq!(
            load_svm(&text.replacen("SVM1", "SVM9", 1)).unwrap_err(),
            ClassifierError::VersionMismatch("SVM9".into())
        );
        let short: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            load_svm(&short),
            Err(ClassifierError::Parse { line: 4, .. })
        ));
    }

    #[test]
    fn dimension_mismatch_after_load() {
        let back = load_svm(&save_svm(&model(KernelSpec::Linear))).unwrap();
        assert!(matches!(
            svm_decision(&back, &[1.0, 2.0]),
            Err(ClassifierError::DimensionMismatch {
                expected: 3,
                got: 2
            })
        ));
    }
}

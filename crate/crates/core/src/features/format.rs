//! PCA1 text format: `PCA1 <d> <k>`, the mean on line 2, then one line per
//! component holding its eigenvalue followed by its d entries.

use std::fmt::Write as _;

use super::pca::PcaModel;
use super::{FeaturesError, Result};

pub fn save_pca(model: &PcaModel) -> String {
    let mut out = String::new();
    writeln!(out, "PCA1 {} {}", model.dim(), model.k()).unwrap();
    write_row(&mut out, None, &model.mean);
    for (lambda, c) in model.eigenvalues.iter().zip(&model.components) {
        write_row(&mut out, Some(*lambda), c);
    }
    out
}

fn write_row(out: &mut String, lead: Option<f64>, values: &[f64]) {
    let mut first = true;
    for v in lead.iter().chain(values) {
        if !first {
            out.push(' ');
        }
        first = false;
        write!(out, "{v:?}").unwrap();
    }
    out.push('\n');
}

fn parse_err(line: usize, message: impl Into<String>) -> FeaturesError {
    FeaturesError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_row(line: &str, ln: usize, expected: usize) -> Result<Vec<f64>> {
    let vals = line
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| parse_err(ln, format!("bad number {t:?}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if vals.len() != expected {
        return Err(parse_err(
            ln,
            format!("expected {expected} values, found {}", vals.len()),
        ));
    }
    Ok(vals)
}

pub fn load_pca(text: &str) -> Result<PcaModel> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (ln, head) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let toks: Vec<&str> = head.split_whitespace().collect();
    match toks.first() {
        Some(&"PCA1") => {}
        Some(other) => return Err(FeaturesError::VersionMismatch(other.to_string())),
        None => return Err(parse_err(ln, "missing header")),
    }
    if toks.len() != 3 {
        return Err(parse_err(ln, "header must be `PCA1 <d> <k>`"));
    }
    let d: usize = toks[1]
        .parse()
        .map_err(|_| parse_err(ln, "bad dimension"))?;
    let k: usize = toks[2]
        .parse()
        .map_err(|_| parse_err(ln, "bad component count"))?;
    if d == 0 || k == 0 {
        return Err(parse_err(
            ln,
            "dimension and component count must be positive",
        ));
    }
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| parse_err(ln, format!("unexpected end of input, expected {what}")))
    };
    let (ln_mean, mean_line) = next("mean row")?;
    let mean = parse_row(mean_line, ln_mean, d)?;
    let mut components = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for _ in 0..k {
        let (ln_c, line) = next("component row")?;
        let mut row = parse_row(line, ln_c, d + 1)?;
        eigenvalues.push(row.remove(0));
        components.push(row);
    }
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
    })
}

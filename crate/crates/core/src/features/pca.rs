use super::eigen::jacobi_eigen;
use super::{FeaturesError, Result};

/// How many principal components to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComponentSpec {
    /// Exactly this many.
    Count(usize),
    /// The fewest components whose eigenvalues explain this fraction of the variance.
    Variance(f64),
}

impl Default for ComponentSpec {
    fn default() -> Self {
        ComponentSpec::Variance(0.95)
    }
}

/// Mean-centred orthonormal projection basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// k rows of length d.
    pub components: Vec<Vec<f64>>,
    /// Non-increasing, one per component.
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }
}

/// Relative size under which a Gram-space direction is treated as null.
const RANK_EPS: f64 = 1e-10;

/// Fits PCA to `samples` (n rows of length d).
///
/// With n <= d the n x n Gram matrix is diagonalised and its eigenvectors
/// are mapped back to d-space; otherwise the d x d covariance is used.
pub fn pca_fit<S: AsRef<[f64]>>(samples: &[S], spec: ComponentSpec) -> Result<PcaModel> {
    let n = samples.len();
    if n < 2 {
        return Err(FeaturesError::TooFewSamples(n));
    }
    let d = samples[0].as_ref().len();
    if d == 0 {
        return Err(FeaturesError::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    for s in samples {
        let s = s.as_ref();
        if s.len() != d {
            return Err(FeaturesError::DimensionMismatch {
                expected: d,
                got: s.len(),
            });
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(FeaturesError::BadK(
                "samples contain non-finite values".into(),
            ));
        }
    }
    let max_k = (n - 1).min(d);
    match spec {
        ComponentSpec::Count(k) if k == 0 || k > max_k => {
            return Err(FeaturesError::BadK(format!(
                "k = {k} outside 1..={max_k} for {n} samples of dimension {d}"
            )))
        }
        ComponentSpec::Variance(rho) if !(rho > 0.0 && rho <= 1.0) => {
            return Err(FeaturesError::BadK(format!(
                "variance fraction {rho} outside (0, 1]"
            )))
        }
        _ => {}
    }

    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(s.as_ref()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.as_ref().iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let identical = samples[1..]
        .iter()
        .all(|s| s.as_ref() == samples[0].as_ref());
    let total: f64 = centered
        .iter()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        / (n - 1) as f64;
    if identical || total <= 0.0 {
        return Err(FeaturesError::DegenerateData);
    }

    let denom = (n - 1) as f64;
    let (mut values, mut vectors) = if n <= d {
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let g = dot(&centered[i], &centered[j]) / denom;
                gram[i * n + j] = g;
                gram[j * n + i] = g;
            }
        }
        let eig = jacobi_eigen(&gram, n);
        let mut values = Vec::new();
        let mut vectors = Vec::new();
        for (lambda, u) in eig.values.into_iter().zip(eig.vectors) {
            if lambda <= RANK_EPS * total {
                break;
            }
            let mut v = vec![0.0; d];
            for (ui, row) in u.iter().zip(&centered) {
                for (vj, x) in v.iter_mut().zip(row) {
                    *vj += ui * x;
                }
            }
            let norm = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            values.push(lambda);
            vectors.push(v);
        }
        (values, vectors)
    } else {
        let mut cov = vec![0.0; d * d];
        for row in &centered {
            for i in 0..d {
                let ri = row[i];
                for j in i..d {
                    cov[i * d + j] += ri * row[j];
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                let c = cov[i * d + j] / denom;
                cov[i * d + j] = c;
                cov[j * d + i] = c;
            }
        }
        let eig = jacobi_eigen(&cov, d);
        (eig.values, eig.vectors)
    };
    for v in values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }

    let k = match spec {
        ComponentSpec::Count(k) => {
            if k > vectors.len() {
                return Err(FeaturesError::BadK(format!(
                    "k = {k} exceeds the numerical rank {} of the data",
                    vectors.len()
                )));
            }
            k
        }
        ComponentSpec::Variance(rho) => {
            let sum: f64 = values.iter().sum();
            let target = rho * sum - 1e-10 * sum;
            let mut acc = 0.0;
            let mut k = values.len();
            for (i, v) in values.iter().enumerate() {
                acc += v;
                if acc >= target {
                    k = i + 1;
                    break;
                }
            }
            k.clamp(1, max_k.min(values.len()))
        }
    };
    values.truncate(k);
    vectors.truncate(k);
    for v in vectors.iter_mut() {
        fix_sign(v);
    }
    Ok(PcaModel {
        mean,
        components: vectors,
        eigenvalues: values,
    })
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn pca_project(model: &PcaModel, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != model.dim() {
        return Err(FeaturesError::DimensionMismatch {
            expected: model.dim(),
            got: v.len(),
        });
    }
    let centered: Vec<f64> = v.iter().zip(&model.mean).map(|(x, m)| x - m).collect();
    Ok(model.components.iter().map(|c| dot(c, &centered)).collect())
}

pub fn pca_reconstruct(model: &PcaModel, z: &[f64]) -> Result<Vec<f64>> {
    if z.len() != model.k() {
        return Err(FeaturesError::DimensionMismatch {
            expected: model.k(),
            got: z.len(),
        });
    }
    let mut out = model.mean.clone();
    for (zi, c) in z.iter().zip(&model.components) {
        for (o, ci) in out.iter_mut().zip(c) {
            *o += zi * ci;
        }
    }
    Ok(out)
}

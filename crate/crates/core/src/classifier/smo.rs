//! Sequential minimal optimisation for the soft-margin SVM dual
//!
//!   max  sum(a) - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
//!   s.t. 0 <= a_i <= C,  sum_i a_i y_i = 0

use super::{ClassLabel, ClassifierError, KernelSpec, Result, SvmModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: KernelSpec,
    pub tol: f64,
    pub max_passes: usize,
}

impl SvmParams {
    pub fn new(c: f64, kernel: KernelSpec) -> Self {
        Self {
            c,
            kernel,
            tol: 1e-3,
            max_passes: 200,
        }
    }
}

/// Solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoReport {
    pub passes: usize,
    pub updates: usize,
    pub converged: bool,
    /// Final multipliers, one per training sample.
    pub alphas: Vec<f64>,
    /// Dual objective after every successful pair update (only when requested).
    pub objective: Vec<f64>,
}

/// Largest n for which the full kernel matrix is cached.
const FULL_CACHE_LIMIT: usize = 4096;
/// Multipliers above this are support vectors.
const SV_EPS: f64 = 1e-8;

enum Gram<'a> {
    Full {
        n: usize,
        k: Vec<f64>,
    },
    OnDemand {
        x: &'a [Vec<f64>],
        kernel: KernelSpec,
    },
}

impl Gram<'_> {
    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Gram::Full { n, k } => k[i * n + j],
            Gram::OnDemand { x, kernel } => kernel.eval(&x[i], &x[j]),
        }
    }
}

struct Solver<'a> {
    y: Vec<f64>,
    alpha: Vec<f64>,
    /// g_i = sum_j a_j y_j K_ij
    g: Vec<f64>,
    c: f64,
    tol: f64,
    gram: Gram<'a>,
    record: bool,
    objective: Vec<f64>,
}

/// Most violating members of the two index sets: `low` holds indices whose
/// KKT condition bounds b from below, `up` those bounding it from above.
struct Extremes {
    low: (f64, usize),
    up: (f64, usize),
}

impl Extremes {
    fn gap(&self) -> f64 {
        self.low.0 - self.up.0
    }
}

impl Solver<'_> {
    /// The bias that would put sample i exactly on the margin.
    #[inline]
    fn edge(&self, i: usize) -> f64 {
        self.y[i] - self.g[i]
    }

    #[inline]
    fn in_low(&self, i: usize) -> bool {
        if self.y[i] > 0.0 {
            self.alpha[i] < self.c
        } else {
            self.alpha[i] > 0.0
        }
    }

    #[inline]
    fn in_up(&self, i: usize) -> bool {
        if self.y[i] > 0.0 {
            self.alpha[i] > 0.0
        } else {
            self.alpha[i] < self.c
        }
    }

    fn is_free(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.c
    }

    fn extremes(&self) -> Extremes {
        let mut low = (f64::NEG_INFINITY, usize::MAX);
        let mut up = (f64::INFINITY, usize::MAX);
        for i in 0..self.alpha.len() {
            let e = self.edge(i);
            if self.in_low(i) && e > low.0 {
                low = (e, i);
            }
            if self.in_up(i) && e < up.0 {
                up = (e, i);
            }
        }
        Extremes { low, up }
    }

    fn dual_objective(&self) -> f64 {
        let sum: f64 = self.alpha.iter().sum();
        let quad: f64 = self
            .alpha
            .iter()
            .zip(&self.y)
            .zip(&self.g)
            .map(|((a, y), g)| a * y * g)
            .sum();
        sum - 0.5 * quad
    }

    fn snap(&self, a: f64) -> f64 {
        let eps = 1e-12 * self.c;
        if a < eps {
            0.0
        } else if a > self.c - eps {
            self.c
        } else {
            a
        }
    }

    /// Analytic update of the pair (i, j). Returns false when no progress is possible.
    fn take_step(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (ai, aj) = (self.alpha[i], self.alpha[j]);
        let (yi, yj) = (self.y[i], self.y[j]);
        // E_i - E_j; the bias cancels.
        let de = self.edge(j) - self.edge(i);
        let c = self.c;
        let (lo, hi) = if yi != yj {
            ((aj - ai).max(0.0), (c + aj - ai).min(c))
        } else {
            ((ai + aj - c).max(0.0), (ai + aj).min(c))
        };
        if hi - lo < 1e-12 * c {
            return false;
        }
        let kii = self.gram.get(i, i);
        let kjj = self.gram.get(j, j);
        let kij = self.gram.get(i, j);
        let eta = kii + kjj - 2.0 * kij;
        let aj_new = if eta > 1e-12 {
            (aj + yj * de / eta).clamp(lo, hi)
        } else if yj * de > 0.0 {
            // flat curvature: the objective is linear along the segment
            hi
        } else {
            lo
        };
        let aj_new = self.snap(aj_new);
        if (aj_new - aj).abs() < 1e-12 * c {
            return false;
        }
        let ai_new = self.snap((ai + yi * yj * (aj - aj_new)).clamp(0.0, c));
        let (dai, daj) = (ai_new - ai, aj_new - aj);
        self.alpha[i] = ai_new;
        self.alpha[j] = aj_new;
        for k in 0..self.g.len() {
            self.g[k] += yi * dai * self.gram.get(i, k) + yj * daj * self.gram.get(j, k);
        }
        debug_assert!(self.feasible(), "dual feasibility lost after SMO step");
        if self.record {
            self.objective.push(self.dual_objective());
        }
        true
    }

    fn feasible(&self) -> bool {
        let eq: f64 = self.alpha.iter().zip(&self.y).map(|(a, y)| a * y).sum();
        let scale = self.c * self.alpha.len() as f64;
        eq.abs() <= 1e-6 * scale.max(1.0) && self.alpha.iter().all(|&a| (0.0..=self.c).contains(&a))
    }

    /// Optimises sample `i` if it violates KKT by more than `tol` against
    /// the best achievable bias. Among the partners that form a violating
    /// pair with `i`, the one promising the largest unclipped gain
    /// (E_i - E_j)^2 / eta is tried first; the rest follow in index order.
    fn examine(&mut self, i: usize, ex: &Extremes) -> bool {
        let e = self.edge(i);
        let as_low = if self.in_low(i) && e - ex.up.0 > self.tol {
            true
        } else if self.in_up(i) && ex.low.0 - e > self.tol {
            false
        } else {
            return false;
        };
        let n = self.alpha.len();
        let kii = self.gram.get(i, i);
        let mut best = None;
        let mut best_gain = 0.0;
        for k in 0..n {
            let ek = self.edge(k);
            let diff = if as_low { e - ek } else { ek - e };
            let partner_ok = if as_low {
                self.in_up(k)
            } else {
                self.in_low(k)
            };
            if k == i || !partner_ok || diff <= self.tol {
                continue;
            }
            let eta = (kii + self.gram.get(k, k) - 2.0 * self.gram.get(i, k)).max(1e-12);
            let gain = diff * diff / eta;
            if gain > best_gain {
                best_gain = gain;
                best = Some(k);
            }
        }
        let Some(partner) = best else { return false };
        let pair = |k: usize| if as_low { (i, k) } else { (k, i) };
        let (a, b) = pair(partner);
        if self.take_step(a, b) {
            return true;
        }
        for off in 1..n {
            let k = (i + off) % n;
            if k == partner {
                continue;
            }
            let ek = self.edge(k);
            let violating = if as_low {
                self.in_up(k) && e - ek > self.tol
            } else {
                self.in_low(k) && ek - e > self.tol
            };
            if violating {
                let (a, b) = pair(k);
                if self.take_step(a, b) {
                    return true;
                }
            }
        }
        false
    }

    /// One pass over all samples (or only the free ones), returning the
    /// number of successful pair updates.
    fn sweep(&mut self, free_only: bool) -> usize {
        let mut changed = 0;
        for i in 0..self.alpha.len() {
            if free_only && !self.is_free(i) {
                continue;
            }
            let ex = self.extremes();
            if ex.gap() <= self.tol {
                break;
            }
            if self.examine(i, &ex) {
                changed += 1;
            }
        }
        changed
    }

    /// Bias from the free multipliers, or the midpoint of the feasible
    /// interval implied by the bound ones.
    fn final_bias(&self) -> f64 {
        let free: Vec<usize> = (0..self.alpha.len()).filter(|&i| self.is_free(i)).collect();
        if !free.is_empty() {
            return free.iter().map(|&i| self.edge(i)).sum::<f64>() / free.len() as f64;
        }
        let ex = self.extremes();
        match (ex.low.0.is_finite(), ex.up.0.is_finite()) {
            (true, true) => 0.5 * (ex.low.0 + ex.up.0),
            (true, false) => ex.low.0,
            (false, true) => ex.up.0,
            (false, false) => 0.0,
        }
    }
}

pub fn svm_train<S: AsRef<[f64]>>(
    x: &[S],
    y: &[ClassLabel],
    params: &SvmParams,
) -> Result<SvmModel> {
    svm_train_impl(x, y, params, false).map(|(m, _)| m)
}

/// Trains and also returns solver diagnostics, including the dual
/// objective after every update.
pub fn svm_train_report<S: AsRef<[f64]>>(
    x: &[S],
    y: &[ClassLabel],
    params: &SvmParams,
) -> Result<(SvmModel, SmoReport)> {
    svm_train_impl(x, y, params, true)
}

fn svm_train_impl<S: AsRef<[f64]>>(
    x: &[S],
    y: &[ClassLabel],
    params: &SvmParams,
    record: bool,
) -> Result<(SvmModel, SmoReport)> {
    let n = x.len();
    if n != y.len() {
        return Err(ClassifierError::InvalidParameter(format!(
            "{n} samples but {} labels",
            y.len()
        )));
    }
    if n < 2 {
        return Err(ClassifierError::TooFewSamples(format!(
            "SVM training needs at least 2 samples, got {n}"
        )));
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(ClassifierError::InvalidParameter(format!(
            "C must be positive, got {}",
            params.c
        )));
    }
    if !(params.tol > 0.0) {
        return Err(ClassifierError::InvalidParameter(format!(
            "tol must be positive, got {}",
            params.tol
        )));
    }
    params.kernel.validate()?;
    let dim = x[0].as_ref().len();
    let rows: Vec<Vec<f64>> = x.iter().map(|r| r.as_ref().to_vec()).collect();
    for r in &rows {
        if r.len() != dim {
            return Err(ClassifierError::DimensionMismatch {
                expected: dim,
                got: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(ClassifierError::NonFinite);
        }
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(ClassifierError::SingleClass);
    }

    let gram = if n <= FULL_CACHE_LIMIT {
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = params.kernel.eval(&rows[i], &rows[j]);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        Gram::Full { n, k }
    } else {
        Gram::OnDemand {
            x: &rows,
            kernel: params.kernel,
        }
    };
    let mut s = Solver {
        y: y.iter().map(|l| l.sign()).collect(),
        alpha: vec![0.0; n],
        g: vec![0.0; n],
        c: params.c,
        tol: params.tol,
        gram,
        record,
        objective: Vec::new(),
    };

    // Full passes alternate with sweeps over the free multipliers, where
    // most of the remaining violations sit. Only full passes count towards
    // `max_passes`; the free sweeps are capped at n per round.
    let mut passes = 0;
    let mut updates = 0;
    let mut converged = false;
    loop {
        if s.extremes().gap() <= params.tol {
            converged = true;
            break;
        }
        if passes >= params.max_passes {
            break;
        }
        passes += 1;
        let changed = s.sweep(false);
        updates += changed;
        if changed == 0 {
            break;
        }
        for _ in 0..n {
            let free_changed = s.sweep(true);
            updates += free_changed;
            if free_changed == 0 {
                break;
            }
        }
    }
    let bias = s.final_bias();
    if !converged {
        log::warn!(
            "SMO stopped after {passes} passes without meeting tol {}",
            params.tol
        );
    }

    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for i in 0..n {
        if s.alpha[i] > SV_EPS {
            support_vectors.push(rows[i].clone());
            dual_coef.push(s.alpha[i] * s.y[i]);
        }
    }
    if support_vectors.is_empty() {
        return Err(ClassifierError::InvalidParameter(
            "solver produced no support vectors".into(),
        ));
    }
    let model = SvmModel {
        support_vectors,
        dual_coef,
        bias,
        kernel: params.kernel,
        c: params.c,
    };
    let report = SmoReport {
        passes,
        updates,
        converged,
        alphas: s.alpha,
        objective: s.objective,
    };
    Ok((model, report))
}

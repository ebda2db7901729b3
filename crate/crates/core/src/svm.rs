//! Class-weighted soft-margin SVM trained by SMO, and the persisted model.
//!
//! The dual solved is
//! `min ½ αᵀQα − Σα` s.t. `0 ≤ α_i ≤ C·w_{y_i}`, `Σ y_i α_i = 0`,
//! with `Q_ij = y_i y_j K(x_i, x_j)`. Working pairs are chosen by the maximal
//! violating pair rule, which is the pair with the largest `|E_i − E_j|`.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::select;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Linear,
    Polynomial,
    Rbf,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [KernelKind::Linear, KernelKind::Polynomial, KernelKind::Rbf];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Polynomial => "polynomial",
            KernelKind::Rbf => "rbf",
        }
    }

    fn code(self) -> u8 {
        match self {
            KernelKind::Linear => 0,
            KernelKind::Polynomial => 1,
            KernelKind::Rbf => 2,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        KernelKind::ALL.get(code as usize).copied()
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KernelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown kernel `{s}`")))
    }
}

/// Kernel and regularization. `degree` is used only by the polynomial kernel
/// and `scale` only by the polynomial and RBF kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub c: f64,
    pub degree: u32,
    pub scale: f64,
}

impl KernelSpec {
    pub fn linear(c: f64) -> Self {
        Self {
            kind: KernelKind::Linear,
            c,
            degree: 0,
            scale: 1.0,
        }
    }

    pub fn polynomial(c: f64, degree: u32, scale: f64) -> Self {
        Self {
            kind: KernelKind::Polynomial,
            c,
            degree,
            scale,
        }
    }

    pub fn rbf(c: f64, scale: f64) -> Self {
        Self {
            kind: KernelKind::Rbf,
            c,
            degree: 0,
            scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidConfig(format!("C must be positive, got {}", self.c)));
        }
        if self.kind != KernelKind::Linear && (!(self.scale > 0.0) || !self.scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "kernel scale must be positive, got {}",
                self.scale
            )));
        }
        if self.kind == KernelKind::Polynomial && self.degree < 2 {
            return Err(Error::InvalidConfig(format!(
                "polynomial degree must be at least 2, got {}",
                self.degree
            )));
        }
        Ok(())
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            KernelKind::Linear => write!(f, "linear(C={})", self.c),
            KernelKind::Polynomial => write!(
                f,
                "polynomial(C={}, degree={}, scale={})",
                self.c, self.degree, self.scale
            ),
            KernelKind::Rbf => write!(f, "rbf(C={}, scale={})", self.c, self.scale),
        }
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn kernel_unchecked(spec: &KernelSpec, x: &[f64], y: &[f64]) -> f64 {
    match spec.kind {
        KernelKind::Linear => dot(x, y),
        KernelKind::Polynomial => (dot(x, y) / spec.scale + 1.0).powi(spec.degree as i32),
        KernelKind::Rbf => {
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            (-d2 / (2.0 * spec.scale * spec.scale)).exp()
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(kernel_unchecked(spec, x, y))
}

/// Inverse class frequency, `n / (2·n_c)`, indexed by [`Label::as_u8`].
pub fn balanced_class_weights(labels: &[Label]) -> Result<[f64; 2]> {
    let pos = labels.iter().filter(|l| l.is_positive()).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let n = labels.len() as f64;
    Ok([n / (2.0 * neg as f64), n / (2.0 * pos as f64)])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoConfig {
    /// Stop when the maximal KKT violation gap `m − M` is at most this.
    pub tol: f64,
    /// Seeds the scan order used to break ties between equally violating indices.
    pub seed: u64,
    /// Non-convergence is declared after `max_passes · n²` pair updates (at
    /// least 1000) without a new smallest violation gap, or after
    /// `HARD_CAP_FACTOR` times that many updates in total.
    pub max_passes: usize,
}

impl Default for SmoConfig {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            seed: 0,
            max_passes: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

const TAU: f64 = 1e-12;

pub const HARD_CAP_FACTOR: usize = 20;

/// Solves the weighted dual on a precomputed row-major Gram matrix.
pub fn solve_dual(gram: &[f64], y: &[f64], upper: &[f64], cfg: &SmoConfig) -> Result<DualSolution> {
    let n = y.len();
    if gram.len() != n * n || upper.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: gram.len(),
        });
    }
    if !y.iter().any(|&v| v > 0.0) || !y.iter().any(|&v| v < 0.0) {
        return Err(Error::SingleClass);
    }
    let k = |i: usize, j: usize| gram[i * n + j];
    let q = |i: usize, j: usize| y[i] * y[j] * gram[i * n + j];

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let stall_limit = (cfg.max_passes * n * n).max(1000);
    let max_iter = stall_limit * HARD_CAP_FACTOR;
    let mut best_gap = f64::INFINITY;
    let mut stalled = 0;
    let in_up = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] < upper[t]) || (y[t] < 0.0 && a[t] > 0.0);
    let in_low = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] > 0.0) || (y[t] < 0.0 && a[t] < upper[t]);

    let mut iterations = 0;
    loop {
        let mut i = usize::MAX;
        let mut j = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        for &t in &order {
            let v = -y[t] * grad[t];
            if in_up(t, &alpha) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(t, &alpha) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin <= cfg.tol {
            break;
        }
        if gmax - gmin < best_gap {
            best_gap = gmax - gmin;
            stalled = 0;
        } else {
            stalled += 1;
        }
        if stalled >= stall_limit || iterations >= max_iter {
            return Err(Error::NonConvergence { iterations });
        }
        iterations += 1;

        let (ci, cj) = (upper[i], upper[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = k(i, i) + k(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = k(i, i) + k(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(i, t) * di + q(j, t) * dj;
        }
    }

    // Bias from the free vectors, or the midpoint of the feasible interval.
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..n {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= upper[t];
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    };
    Ok(DualSolution {
        alpha,
        bias: -rho,
        iterations,
    })
}

/// Per-feature z-score statistics from training rows; constant columns get std 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Normalizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let mut means = vec![0.0; dim];
        let mut stds = vec![0.0; dim];
        for j in 0..dim {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            means[j] = crate::stats::mean(&col);
            let s = crate::stats::population_std(&col);
            stds[j] = if s > 0.0 && s.is_finite() { s } else { 1.0 };
        }
        Self { means, stds }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// A trained classifier: which input columns it reads, how it normalizes them,
/// and the dual expansion `score(z) = Σ coef_i K(sv_i, z) + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: KernelSpec,
    pub class_weights: [f64; 2],
    pub n_input_features: usize,
    pub selected: Vec<usize>,
    pub selected_names: Vec<String>,
    pub normalizer: Normalizer,
    /// Support vectors in normalized, selected coordinates.
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i·y_i` for each support vector.
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

/// Trains on all columns of `rows` with z-normalization fitted to `rows`.
pub fn train(
    rows: &[Vec<f64>],
    labels: &[Label],
    spec: &KernelSpec,
    class_weights: [f64; 2],
    cfg: &SmoConfig,
) -> Result<TrainedModel> {
    let dim = rows.first().map_or(0, Vec::len);
    let names = (0..dim).map(|j| format!("x{j}")).collect();
    train_selected(rows, labels, (0..dim).collect(), names, spec, class_weights, cfg)
}

fn train_selected(
    rows: &[Vec<f64>],
    labels: &[Label],
    selected: Vec<usize>,
    selected_names: Vec<String>,
    spec: &KernelSpec,
    class_weights: [f64; 2],
    cfg: &SmoConfig,
) -> Result<TrainedModel> {
    spec.validate()?;
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            got: labels.len(),
        });
    }
    let n_input = rows.first().map_or(0, Vec::len);
    for (r, row) in rows.iter().enumerate() {
        if row.len() != n_input {
            return Err(Error::DimensionMismatch {
                expected: n_input,
                got: row.len(),
            });
        }
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature { row: r, col: c });
        }
    }
    let picked: Vec<Vec<f64>> = rows.iter().map(|r| selected.iter().map(|&j| r[j]).collect()).collect();
    let normalizer = Normalizer::fit(&picked);
    let z: Vec<Vec<f64>> = picked.iter().map(|r| normalizer.apply(r)).collect();

    let n = z.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel_unchecked(spec, &z[i], &z[j]);
            gram[i * n + j] = v;
            gram[j * n + i] = v;
        }
    }
    if gram.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "kernel {spec} overflows on the training data"
        )));
    }
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let upper: Vec<f64> = labels
        .iter()
        .map(|l| spec.c * class_weights[l.as_u8() as usize])
        .collect();
    let sol = solve_dual(&gram, &y, &upper, cfg)?;

    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for (t, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(z[t].clone());
            coefficients.push(a * y[t]);
        }
    }
    Ok(TrainedModel {
        spec: *spec,
        class_weights,
        n_input_features: n_input,
        selected,
        selected_names,
        normalizer,
        support_vectors,
        coefficients,
        bias: sol.bias,
        iterations: sol.iterations,
    })
}

/// Feature-selection settings applied inside [`fit_model`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionRule {
    pub threshold: f64,
    pub k: usize,
}

impl Default for SelectionRule {
    fn default() -> Self {
        Self {
            threshold: select::DEFAULT_THRESHOLD,
            k: select::DEFAULT_K,
        }
    }
}

/// Selects features on `train`, then trains with balanced class weights.
///
/// When no feature passes the threshold the `k` smallest-p features are used,
/// so a model can always be built.
pub fn fit_model(
    train_set: &Dataset,
    spec: &KernelSpec,
    rule: &SelectionRule,
    cfg: &SmoConfig,
) -> Result<TrainedModel> {
    let p = select::feature_p_values(train_set)?;
    let mut sel = select::select_from_p_values(&p, &train_set.names, rule.threshold, rule.k)?;
    if sel.kept_indices.is_empty() {
        sel = select::select_from_p_values(&p, &train_set.names, f64::INFINITY, rule.k)?;
    }
    let weights = balanced_class_weights(&train_set.labels)?;
    train_selected(
        &train_set.rows,
        &train_set.labels,
        sel.kept_indices,
        sel.kept_names,
        spec,
        weights,
        cfg,
    )
}

impl TrainedModel {
    pub fn decision_function(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_input_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_input_features,
                got: x.len(),
            });
        }
        let picked: Vec<f64> = self.selected.iter().map(|&j| x[j]).collect();
        let z = self.normalizer.apply(&picked);
        let mut score = self.bias;
        for (sv, c) in self.support_vectors.iter().zip(&self.coefficients) {
            score += c * kernel_unchecked(&self.spec, sv, &z);
        }
        Ok(score)
    }

    /// Failure iff the score is strictly positive.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(if self.decision_function(x)? > 0.0 {
            Label::Failure
        } else {
            Label::Success
        })
    }

    pub fn scores(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.decision_function(r)).collect()
    }

    /// Serialized form. All integers and floats are little-endian.
    ///
    /// ```text
    /// "NUSVM1"
    /// u8 kernel (0 linear, 1 polynomial, 2 rbf) | f64 C | f64 scale | u32 degree
    /// f64 weight_success | f64 weight_failure
    /// u64 n_input_features | u64 n_selected
    /// n_selected × (u64 column, u32 name_len, name bytes)
    /// n_selected × f64 mean | n_selected × f64 std
    /// u64 n_support | n_support × (f64 coefficient, n_selected × f64)
    /// f64 bias | u64 iterations
    /// ```
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(self.spec.kind.code());
        out.extend_from_slice(&self.spec.c.to_le_bytes());
        out.extend_from_slice(&self.spec.scale.to_le_bytes());
        out.extend_from_slice(&self.spec.degree.to_le_bytes());
        for w in self.class_weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.extend_from_slice(&(self.n_input_features as u64).to_le_bytes());
        out.extend_from_slice(&(self.selected.len() as u64).to_le_bytes());
        for (j, name) in self.selected.iter().zip(&self.selected_names) {
            out.extend_from_slice(&(*j as u64).to_le_bytes());
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
        }
        for v in self.normalizer.means.iter().chain(&self.normalizer.stds) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.support_vectors.len() as u64).to_le_bytes());
        for (sv, c) in self.support_vectors.iter().zip(&self.coefficients) {
            out.extend_from_slice(&c.to_le_bytes());
            for v in sv {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.bias.to_le_bytes());
        out.extend_from_slice(&(self.iterations as u64).to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::InvalidModel("bad magic header".into()));
        }
        let kind = KernelKind::from_code(r.u8()?).ok_or_else(|| Error::InvalidModel("unknown kernel code".into()))?;
        let c = r.f64()?;
        let scale = r.f64()?;
        let degree = r.u32()?;
        let class_weights = [r.f64()?, r.f64()?];
        let n_input_features = r.len()?;
        let n_sel = r.len()?;
        let mut selected = Vec::with_capacity(n_sel);
        let mut selected_names = Vec::with_capacity(n_sel);
        for _ in 0..n_sel {
            let j = r.len()?;
            if j >= n_input_features {
                return Err(Error::InvalidModel(format!("column {j} out of range")));
            }
            selected.push(j);
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::InvalidModel("feature name is not UTF-8".into()))?;
            selected_names.push(name.to_string());
        }
        let means = (0..n_sel).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let stds = (0..n_sel).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let n_sv = r.len()?;
        let mut support_vectors = Vec::new();
        let mut coefficients = Vec::new();
        for _ in 0..n_sv {
            coefficients.push(r.f64()?);
            support_vectors.push((0..n_sel).map(|_| r.f64()).collect::<Result<Vec<_>>>()?);
        }
        let bias = r.f64()?;
        let iterations = r.len()?;
        if r.pos != bytes.len() {
            return Err(Error::InvalidModel("trailing bytes".into()));
        }
        let spec = KernelSpec { kind, c, degree, scale };
        spec.validate().map_err(|e| Error::InvalidModel(e.to_string()))?;
        Ok(Self {
            spec,
            class_weights,
            n_input_features,
            selected,
            selected_names,
            normalizer: Normalizer { means, stds },
            support_vectors,
            coefficients,
            bias,
            iterations,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::MissingFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_bytes(&bytes)
    }
}

const MAGIC: &[u8] = b"NUSVM1";

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::InvalidModel("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::InvalidModel("length overflow".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

//! Gaussian-process Bayesian optimization with expected improvement, and its
//! use for choosing SVM kernel hyperparameters.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{auc_roc, stratified_split, TRAIN_FRACTION};
use crate::io::Stamp;
use crate::rng::{derive_seed, seeded};
use crate::svm::{fit_model, KernelKind, KernelSpec, SelectionRule, SmoConfig};

pub const DEFAULT_ITERATIONS: usize = 100;
pub const DEFAULT_INIT_RANDOM: usize = 10;
pub const DEFAULT_CANDIDATES: usize = 1024;

/// Observation noise added to the GP diagonal before any escalation.
pub const GP_NOISE: f64 = 1e-6;
const NOISE_ESCALATIONS: usize = 3;
/// Candidate Matérn lengthscales (unit-box coordinates); the one with the
/// highest marginal likelihood is used.
pub const LENGTHSCALE_GRID: [f64; 6] = [0.05, 0.1, 0.2, 0.3, 0.5, 1.0];
/// Candidates closer than this (unit-box distance) to a failed evaluation are
/// not proposed.
pub const FAILURE_RADIUS: f64 = 0.1;

/// The SVM hyperparameter box.
///
/// Coordinates are `[kernel_axis, log10_c, log10_scale, degree_axis]`. The
/// kernel axis is floored to linear / polynomial / RBF and the degree axis is
/// rounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpace;

impl SearchSpace {
    pub const BOUNDS: [(f64, f64); 4] = [(0.0, 3.0), (-3.0, 3.0), (-3.0, 2.0), (2.0, 5.0)];

    pub fn decode(point: &[f64]) -> KernelSpec {
        let kind_idx = (point[0].clamp(0.0, 3.0).floor() as usize).min(2);
        let degree = point[3].clamp(2.0, 5.0).round() as u32;
        KernelSpec {
            kind: KernelKind::ALL[kind_idx],
            c: 10f64.powf(point[1].clamp(-3.0, 3.0)),
            degree,
            scale: 10f64.powf(point[2].clamp(-3.0, 2.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpParams {
    pub lengthscale: f64,
    pub noise: f64,
}

pub fn matern52(r: f64, lengthscale: f64) -> f64 {
    let s = 5f64.sqrt() * r / lengthscale;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Lower-triangular Cholesky factor, or `None` if not positive definite.
fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn forward(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            x[i] -= l[i * n + k] * x[k];
        }
        x[i] /= l[i * n + i];
    }
    x
}

fn backward(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        for k in i + 1..n {
            x[i] -= l[k * n + i] * x[k];
        }
        x[i] /= l[i * n + i];
    }
    x
}

/// A fitted GP posterior. Targets are standardized internally; predictions are
/// in the original units.
#[derive(Debug, Clone)]
pub struct GpModel {
    points: Vec<Vec<f64>>,
    chol: Vec<f64>,
    alpha: Vec<f64>,
    y_mean: f64,
    y_sd: f64,
    pub params: GpParams,
    pub log_likelihood: f64,
}

impl GpModel {
    pub fn fit(points: &[Vec<f64>], values: &[f64], lengthscale: f64) -> Result<Self> {
        let n = points.len();
        if n == 0 || values.len() != n {
            return Err(Error::EmptySample);
        }
        let y_mean = crate::stats::mean(values);
        let sd = crate::stats::population_std(values);
        let y_sd = if sd > 0.0 { sd } else { 1.0 };
        let y: Vec<f64> = values.iter().map(|v| (v - y_mean) / y_sd).collect();
        let mut noise = GP_NOISE;
        for _ in 0..=NOISE_ESCALATIONS {
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    k[i * n + j] = matern52(distance(&points[i], &points[j]), lengthscale);
                }
                k[i * n + i] += noise;
            }
            if let Some(chol) = cholesky(&k, n) {
                let alpha = backward(&chol, n, &forward(&chol, n, &y));
                let log_det: f64 = (0..n).map(|i| chol[i * n + i].ln()).sum();
                let fit: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
                let log_likelihood = -0.5 * fit - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
                return Ok(Self {
                    points: points.to_vec(),
                    chol,
                    alpha,
                    y_mean,
                    y_sd,
                    params: GpParams { lengthscale, noise },
                    log_likelihood,
                });
            }
            noise *= 10.0;
        }
        Err(Error::SingularCovariance)
    }

    /// Fits each lengthscale in [`LENGTHSCALE_GRID`] and keeps the most likely.
    pub fn fit_ml(points: &[Vec<f64>], values: &[f64]) -> Result<Self> {
        let mut best: Option<GpModel> = None;
        let mut last_err = Error::SingularCovariance;
        for &ls in &LENGTHSCALE_GRID {
            match Self::fit(points, values, ls) {
                Ok(m) => {
                    if best.as_ref().is_none_or(|b| m.log_likelihood > b.log_likelihood) {
                        best = Some(m);
                    }
                }
                Err(e) => last_err = e,
            }
        }
        best.ok_or(last_err)
    }

    /// Posterior mean and standard deviation at `x`.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let n = self.points.len();
        let ks: Vec<f64> = self
            .points
            .iter()
            .map(|p| matern52(distance(p, x), self.params.lengthscale))
            .collect();
        let mean: f64 = ks.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = forward(&self.chol, n, &ks);
        let var = (1.0 - v.iter().map(|x| x * x).sum::<f64>()).max(0.0);
        (self.y_mean + self.y_sd * mean, self.y_sd * var.sqrt())
    }
}

/// Posterior (mean, std) at each query, lengthscale chosen by marginal likelihood.
pub fn gp_fit_predict(points: &[Vec<f64>], values: &[f64], queries: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
    let gp = GpModel::fit_ml(points, values)?;
    Ok(queries.iter().map(|q| gp.predict(q)).collect())
}

/// As [`gp_fit_predict`] with a fixed lengthscale.
pub fn gp_fit_predict_with(
    points: &[Vec<f64>],
    values: &[f64],
    queries: &[Vec<f64>],
    lengthscale: f64,
) -> Result<Vec<(f64, f64)>> {
    let gp = GpModel::fit(points, values, lengthscale)?;
    Ok(queries.iter().map(|q| gp.predict(q)).collect())
}

/// Expected improvement over `best` for maximization.
pub fn expected_improvement(mean: f64, std: f64, best: f64) -> f64 {
    let gain = mean - best;
    if !(std > 0.0) {
        return gain.max(0.0);
    }
    let z = gain / std;
    let n = Normal::standard();
    (gain * n.cdf(z) + std * n.pdf(z)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoConfig {
    pub iterations: usize,
    pub init_random: usize,
    pub candidates: usize,
    pub seed: u64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            init_random: DEFAULT_INIT_RANDOM,
            candidates: DEFAULT_CANDIDATES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub point: Vec<f64>,
    /// `-inf` when the objective failed.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub evaluations: Vec<Evaluation>,
    /// Running maximum after each evaluation.
    pub best_so_far: Vec<f64>,
    pub seed: u64,
}

impl OptState {
    pub fn iterations(&self) -> usize {
        self.evaluations.len()
    }

    /// First evaluation attaining the best value.
    pub fn best(&self) -> Option<&Evaluation> {
        let best = *self.best_so_far.last()?;
        self.evaluations.iter().find(|e| e.value == best)
    }
}

fn to_box(u: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    u.iter().zip(bounds).map(|(u, (lo, hi))| lo + u * (hi - lo)).collect()
}

fn latin_hypercube<R: Rng>(rng: &mut R, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dim]; n];
    for d in 0..dim {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (i, s) in strata.into_iter().enumerate() {
            pts[i][d] = (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    pts
}

/// Maximizes `f` over the box `bounds`.
///
/// The first `init_random` points form a Latin hypercube; each later point
/// maximizes expected improvement under a GP fitted to the successful
/// evaluations, searched by `candidates` random points followed by a
/// coordinate pattern search from the best one. Objective errors are recorded
/// as `-inf`.
pub fn maximize<F>(bounds: &[(f64, f64)], cfg: &BoConfig, mut f: F) -> Result<OptState>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if cfg.init_random == 0 || cfg.iterations < cfg.init_random {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= init_random ({}) <= iterations ({})",
            cfg.init_random, cfg.iterations
        )));
    }
    let dim = bounds.len();
    let mut rng = seeded(cfg.seed);
    let init = latin_hypercube(&mut rng, cfg.init_random, dim);
    let mut units: Vec<Vec<f64>> = Vec::new();
    let mut state = OptState {
        evaluations: Vec::new(),
        best_so_far: Vec::new(),
        seed: cfg.seed,
    };
    for it in 0..cfg.iterations {
        let u = if it < init.len() {
            init[it].clone()
        } else {
            propose(&units, &state, dim, cfg.candidates, &mut rng)
        };
        let point = to_box(&u, bounds);
        let value = match f(&point) {
            Ok(v) if !v.is_nan() => v,
            _ => f64::NEG_INFINITY,
        };
        let prev = state.best_so_far.last().copied().unwrap_or(f64::NEG_INFINITY);
        state.best_so_far.push(prev.max(value));
        state.evaluations.push(Evaluation { point, value });
        units.push(u);
    }
    Ok(state)
}

fn propose<R: Rng>(units: &[Vec<f64>], state: &OptState, dim: usize, candidates: usize, rng: &mut R) -> Vec<f64> {
    let random_point = |rng: &mut R| (0..dim).map(|_| rng.random::<f64>()).collect::<Vec<f64>>();
    let (xs, ys): (Vec<Vec<f64>>, Vec<f64>) = units
        .iter()
        .zip(&state.evaluations)
        .filter(|(_, e)| e.value.is_finite())
        .map(|(u, e)| (u.clone(), e.value))
        .unzip();
    let gp = match GpModel::fit_ml(&xs, &ys) {
        Ok(gp) if !xs.is_empty() => gp,
        _ => return random_point(rng),
    };
    let failed: Vec<&Vec<f64>> = units
        .iter()
        .zip(&state.evaluations)
        .filter(|(_, e)| !e.value.is_finite())
        .map(|(u, _)| u)
        .collect();
    let best = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ei = |u: &[f64]| {
        let near_failure = failed
            .iter()
            .any(|f| f.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < FAILURE_RADIUS * FAILURE_RADIUS);
        if near_failure {
            return -1.0;
        }
        let (m, s) = gp.predict(u);
        expected_improvement(m, s, best)
    };
    let mut top = random_point(rng);
    let mut top_ei = ei(&top);
    for _ in 1..candidates.max(1) {
        let c = random_point(rng);
        let v = ei(&c);
        if v > top_ei {
            top = c;
            top_ei = v;
        }
    }
    let mut step = 0.05;
    while step >= 1e-3 {
        let mut improved = false;
        for d in 0..dim {
            for dir in [-1.0, 1.0] {
                let mut c = top.clone();
                c[d] = (c[d] + dir * step).clamp(0.0, 1.0);
                let v = ei(&c);
                if v > top_ei {
                    top = c;
                    top_ei = v;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    top
}

/// `(AUC_train + AUC_test) / 2` of a model fitted on the training side.
pub fn svm_objective(
    ds: &Dataset,
    train_idx: &[usize],
    test_idx: &[usize],
    spec: &KernelSpec,
    selection: &SelectionRule,
    smo: &SmoConfig,
) -> Result<f64> {
    let train = ds.subset(train_idx);
    let test = ds.subset(test_idx);
    let model = fit_model(&train, spec, selection, smo)?;
    let auc_train = auc_roc(&model.scores(&train.rows)?, &train.labels)?;
    let auc_test = auc_roc(&model.scores(&test.rows)?, &test.labels)?;
    Ok((auc_train + auc_test) / 2.0)
}

/// Seeded 70/30 stratified split used for the whole search.
pub fn objective_split(ds: &Dataset, seed: u64) -> Result<crate::eval::Split> {
    let split = stratified_split(&ds.labels, TRAIN_FRACTION, derive_seed(seed, 0x5e))?;
    if split.is_degenerate(&ds.labels) {
        return Err(Error::DegenerateSplit);
    }
    Ok(split)
}

/// One call of [`svm_objective`] on the search's own split.
pub fn objective(
    ds: &Dataset,
    spec: &KernelSpec,
    seed: u64,
    selection: &SelectionRule,
    smo: &SmoConfig,
) -> Result<f64> {
    let split = objective_split(ds, seed)?;
    svm_objective(ds, &split.train, &split.test, spec, selection, smo)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmSearch {
    pub state: OptState,
    pub specs: Vec<KernelSpec>,
}

impl SvmSearch {
    pub fn best_spec(&self) -> Option<KernelSpec> {
        let best = self.state.best()?;
        if !best.value.is_finite() {
            return None;
        }
        Some(SearchSpace::decode(&best.point))
    }

    /// Successful evaluations, best first; equal objectives keep search order.
    pub fn ranked_specs(&self) -> Vec<(KernelSpec, f64)> {
        let mut ranked: Vec<(KernelSpec, f64)> = self
            .specs
            .iter()
            .zip(&self.state.evaluations)
            .filter(|(_, e)| e.value.is_finite())
            .map(|(s, e)| (*s, e.value))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        ranked
    }

    /// `iteration,kernel,c,scale,degree,objective,best_so_far`
    pub fn trace_csv(&self, stamp: Option<&Stamp>) -> String {
        let mut out = String::new();
        if let Some(stamp) = stamp {
            out.push_str(&stamp.comment_line());
        }
        out.push_str("iteration,kernel,c,scale,degree,objective,best_so_far\n");
        for (i, ((e, spec), best)) in self
            .state
            .evaluations
            .iter()
            .zip(&self.specs)
            .zip(&self.state.best_so_far)
            .enumerate()
        {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                i + 1,
                spec.kind.name(),
                spec.c,
                spec.scale,
                spec.degree,
                e.value,
                best
            ));
        }
        out
    }

    pub fn write_trace(&self, path: &Path, stamp: Option<&Stamp>) -> Result<()> {
        crate::io::write_file(path, &self.trace_csv(stamp))
    }
}

/// Searches [`SearchSpace`] for the kernel spec maximizing [`objective`].
pub fn optimize_svm(ds: &Dataset, cfg: &BoConfig, selection: &SelectionRule, smo: &SmoConfig) -> Result<SvmSearch> {
    let split = objective_split(ds, cfg.seed)?;
    let mut specs = Vec::new();
    let state = maximize(&SearchSpace::BOUNDS, cfg, |p| {
        let spec = SearchSpace::decode(p);
        specs.push(spec);
        svm_objective(ds, &split.train, &split.test, &spec, selection, smo)
    })?;
    Ok(SvmSearch { state, specs })
}

//! Classification metrics, ROC AUC, stratified partitions and repeated
//! cross-validation. Failure (class 1) is the positive class throughout.

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::io::Stamp;
use crate::rng::{derive_seed, seeded};
use crate::stats;
use crate::svm::{fit_model, KernelSpec, SelectionRule, SmoConfig};

pub const DEFAULT_REPETITIONS: usize = 150;
pub const DEFAULT_FOLDS: usize = 4;
pub const TRAIN_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_predictions(predicted: &[Label], truth: &[Label]) -> Self {
        let mut c = Self::default();
        for (p, t) in predicted.iter().zip(truth) {
            match (p.is_positive(), t.is_positive()) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Point metrics; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointMetrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub specificity: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn confusion_metrics(c: &ConfusionCounts) -> PointMetrics {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    PointMetrics {
        accuracy: ratio(c.tp + c.tn, c.total()),
        precision,
        recall,
        f1,
        specificity: ratio(c.tn, c.tn + c.fp),
    }
}

/// Trapezoidal area under the empirical ROC curve.
///
/// Tied scores form a single ROC step, so the result equals
/// `(wins + ties/2) / (n0·n1)`. The area is accumulated in integers and
/// divided once, which makes that equality exact.
pub fn auc_roc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    let (num, den) = auc_fraction(scores, labels)?;
    Ok(num as f64 / den as f64)
}

/// AUC as the exact fraction `num / den` with `den = 2·n0·n1`.
pub fn auc_fraction(scores: &[f64], labels: &[Label]) -> Result<(u128, u128)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let n1 = labels.iter().filter(|l| l.is_positive()).count() as u128;
    let n0 = labels.len() as u128 - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    // twice_area = Σ Δfp · (tp_before + tp_after), in units of 1/(n0·n1)/2.
    let (mut tp, mut fp, mut twice_area) = (0u128, 0u128, 0u128);
    let mut i = 0;
    while i < order.len() {
        let (mut dtp, mut dfp) = (0u128, 0u128);
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]].is_positive() {
                dtp += 1;
            } else {
                dfp += 1;
            }
            j += 1;
        }
        twice_area += dfp * (2 * tp + dtp);
        tp += dtp;
        fp += dfp;
        i = j;
    }
    debug_assert_eq!((tp, fp), (n1, n0));
    Ok((twice_area, 2 * n0 * n1))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// True when either side lacks one of the two classes.
    pub fn is_degenerate(&self, labels: &[Label]) -> bool {
        let has_both = |idx: &[usize]| {
            idx.iter().any(|&i| labels[i].is_positive()) && idx.iter().any(|&i| !labels[i].is_positive())
        };
        !has_both(&self.train) || !has_both(&self.test)
    }
}

fn class_members(labels: &[Label]) -> [Vec<usize>; 2] {
    let mut members = [Vec::new(), Vec::new()];
    for (i, l) in labels.iter().enumerate() {
        members[l.as_u8() as usize].push(i);
    }
    members
}

/// Shuffles each class and puts `round(fraction·n_c)` of it in the training side.
pub fn stratified_split(labels: &[Label], fraction: f64, seed: u64) -> Result<Split> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidConfig(format!(
            "split fraction {fraction} outside [0, 1]"
        )));
    }
    let mut members = class_members(labels);
    if members.iter().any(Vec::is_empty) {
        return Err(Error::SingleClass);
    }
    let interior = fraction > 0.0 && fraction < 1.0;
    let mut rng = seeded(seed);
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (class, idx) in members.iter_mut().enumerate() {
        if interior && idx.len() < 2 {
            return Err(Error::ClassTooSmall {
                class: class as u8,
                count: idx.len(),
                needed: 2,
            });
        }
        idx.shuffle(&mut rng);
        let mut n_train = (fraction * idx.len() as f64).round() as usize;
        if interior {
            n_train = n_train.clamp(1, idx.len() - 1);
        }
        split.train.extend_from_slice(&idx[..n_train]);
        split.test.extend_from_slice(&idx[n_train..]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// `k` disjoint validation folds covering every index, each class dealt
/// round-robin after a seeded shuffle.
pub fn stratified_kfold(labels: &[Label], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("fold count must be at least 2, got {k}")));
    }
    let mut members = class_members(labels);
    let mut rng = seeded(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for (class, idx) in members.iter_mut().enumerate() {
        if idx.len() < k {
            return Err(Error::ClassTooSmall {
                class: class as u8,
                count: idx.len(),
                needed: k,
            });
        }
        idx.shuffle(&mut rng);
        for &i in idx.iter() {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Everything needed to fit and score one model inside cross-validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvConfig {
    pub repetitions: usize,
    pub folds: usize,
    pub seed: u64,
    pub selection: SelectionRule,
    pub smo: SmoConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            repetitions: DEFAULT_REPETITIONS,
            folds: DEFAULT_FOLDS,
            seed: 0,
            selection: SelectionRule::default(),
            smo: SmoConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldEvaluation {
    pub repetition: usize,
    pub fold: usize,
    pub counts: ConfusionCounts,
    pub metrics: PointMetrics,
    pub auc: Option<f64>,
    pub selected: Vec<String>,
}

/// Fits on the complement of each fold and scores the fold.
pub fn evaluate_folds(
    ds: &Dataset,
    spec: &KernelSpec,
    folds: &[Vec<usize>],
    selection: &SelectionRule,
    smo: &SmoConfig,
    repetition: usize,
) -> Result<Vec<FoldEvaluation>> {
    let mut in_fold = vec![usize::MAX; ds.len()];
    for (f, idx) in folds.iter().enumerate() {
        for &i in idx {
            in_fold[i] = f;
        }
    }
    folds
        .iter()
        .enumerate()
        .map(|(f, val_idx)| {
            let train_idx: Vec<usize> = (0..ds.len()).filter(|&i| in_fold[i] != f).collect();
            let model = fit_model(&ds.subset(&train_idx), spec, selection, smo)?;
            let val = ds.subset(val_idx);
            let scores = model.scores(&val.rows)?;
            let predicted: Vec<Label> = scores
                .iter()
                .map(|&s| if s > 0.0 { Label::Failure } else { Label::Success })
                .collect();
            let counts = ConfusionCounts::from_predictions(&predicted, &val.labels);
            Ok(FoldEvaluation {
                repetition,
                fold: f,
                counts,
                metrics: confusion_metrics(&counts),
                auc: auc_roc(&scores, &val.labels).ok(),
                selected: model.selected_names.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation over the defined fold values.
    pub std: f64,
    pub count: usize,
    pub undefined: usize,
}

impl MetricSummary {
    pub fn from_values(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let mut defined = Vec::new();
        let mut undefined = 0;
        for v in values {
            match v {
                Some(x) => defined.push(x),
                None => undefined += 1,
            }
        }
        Self {
            mean: if defined.is_empty() {
                f64::NAN
            } else {
                stats::mean(&defined)
            },
            std: stats::sample_std(&defined),
            count: defined.len(),
            undefined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub accuracy: MetricSummary,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f1: MetricSummary,
    pub specificity: MetricSummary,
    pub auc: MetricSummary,
    pub folds: usize,
    pub repetitions: usize,
    pub positive_class: String,
    pub kernel: String,
    pub evaluations: Vec<FoldEvaluation>,
}

impl EvalReport {
    pub fn from_evaluations(
        evaluations: Vec<FoldEvaluation>,
        folds: usize,
        repetitions: usize,
        spec: &KernelSpec,
    ) -> Self {
        let pick = |f: fn(&FoldEvaluation) -> Option<f64>| MetricSummary::from_values(evaluations.iter().map(f));
        Self {
            accuracy: pick(|e| e.metrics.accuracy),
            precision: pick(|e| e.metrics.precision),
            recall: pick(|e| e.metrics.recall),
            f1: pick(|e| e.metrics.f1),
            specificity: pick(|e| e.metrics.specificity),
            auc: pick(|e| e.auc),
            folds,
            repetitions,
            positive_class: "failure".into(),
            kernel: spec.to_string(),
            evaluations,
        }
    }

    pub fn rows(&self) -> [(&'static str, &MetricSummary); 6] {
        [
            ("accuracy", &self.accuracy),
            ("precision", &self.precision),
            ("recall", &self.recall),
            ("f1", &self.f1),
            ("specificity", &self.specificity),
            ("auc", &self.auc),
        ]
    }

    /// `metric,mean,std`
    pub fn to_csv(&self, stamp: Option<&Stamp>) -> String {
        let mut out = String::new();
        if let Some(stamp) = stamp {
            out.push_str(&stamp.comment_line());
        }
        out.push_str("metric,mean,std\n");
        for (name, m) in self.rows() {
            out.push_str(&format!("{name},{},{}\n", m.mean, m.std));
        }
        out
    }

    pub fn to_json(&self, stamp: Option<&Stamp>) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        if let (Some(stamp), Some(obj)) = (stamp, value.as_object_mut()) {
            obj.insert("config_hash".into(), stamp.config_hash.clone().into());
            obj.insert("seed".into(), stamp.seed.into());
        }
        Ok(serde_json::to_string_pretty(&value)? + "\n")
    }

    pub fn write(&self, csv_path: &Path, json_path: &Path, stamp: Option<&Stamp>) -> Result<()> {
        crate::io::write_file(csv_path, &self.to_csv(stamp))?;
        crate::io::write_file(json_path, &self.to_json(stamp)?)
    }
}

/// Fresh stratified k-fold per repetition, each with its own derived seed.
/// Repetitions run in parallel; results keep repetition order.
pub fn repeated_cv(ds: &Dataset, spec: &KernelSpec, cfg: &CvConfig) -> Result<EvalReport> {
    if cfg.repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
    }
    stratified_kfold(&ds.labels, cfg.folds, cfg.seed)?;
    let per_rep: Vec<Vec<FoldEvaluation>> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| {
            let folds = stratified_kfold(&ds.labels, cfg.folds, derive_seed(cfg.seed, r as u64))?;
            evaluate_folds(ds, spec, &folds, &cfg.selection, &cfg.smo, r)
        })
        .collect::<Result<_>>()?;
    Ok(EvalReport::from_evaluations(
        per_rep.into_iter().flatten().collect(),
        cfg.folds,
        cfg.repetitions,
        spec,
    ))
}

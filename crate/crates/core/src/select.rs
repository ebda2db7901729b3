//! Mann-Whitney U test and p-value-based feature selection.

use std::path::Path;

use statrs::function::erf::erfc;

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::io::Stamp;
use crate::stats;

/// Largest pooled sample size for which the exact null distribution is used.
pub const EXACT_MAX_POOLED: usize = 20;

pub const DEFAULT_THRESHOLD: f64 = 0.05;
pub const DEFAULT_K: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTestResult {
    /// `min(U_a, U_b)`.
    pub u_statistic: f64,
    /// Continuity-corrected z score; only set on the approximate path.
    pub z_value: Option<f64>,
    pub p_two_sided: f64,
    pub method: RankMethod,
}

/// Midranks (1-based) of `pooled`, plus the tie-group sizes.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && pooled[order[j]] == pooled[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &o in &order[i..j] {
            ranks[o] = rank;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

/// Number of arrangements of `m` + `n` distinct values giving each U in `0..=m*n`.
pub fn u_null_counts(m: usize, n: usize) -> Vec<f64> {
    // table[j][u] counts arrangements of i values from sample a and j from b.
    let mut prev: Vec<Vec<f64>> = (0..=n).map(|_| vec![1.0]).collect();
    for i in 1..=m {
        let mut cur: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        cur.push(vec![1.0]);
        for j in 1..=n {
            let mut row = vec![0.0; i * j + 1];
            // Largest value from a: it beats all j values of b.
            for (u, c) in prev[j].iter().enumerate() {
                row[u + j] += c;
            }
            // Largest value from b: contributes nothing.
            for (u, c) in cur[j - 1].iter().enumerate() {
                row[u] += c;
            }
            cur.push(row);
        }
        prev = cur;
    }
    prev.pop().unwrap()
}

pub fn mann_whitney(sample_a: &[f64], sample_b: &[f64]) -> Result<RankTestResult> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (na, nb) = (sample_a.len(), sample_b.len());
    let pooled: Vec<f64> = sample_a.iter().chain(sample_b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..na].iter().sum();
    let nn = (na * nb) as f64;
    let u_a = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let u = u_a.min(nn - u_a);

    if na + nb <= EXACT_MAX_POOLED && ties.is_empty() {
        let counts = u_null_counts(na, nb);
        let total: f64 = counts.iter().sum();
        let below: f64 = counts[..=(u.round() as usize)].iter().sum();
        return Ok(RankTestResult {
            u_statistic: u,
            z_value: None,
            p_two_sided: (2.0 * below / total).min(1.0),
            method: RankMethod::Exact,
        });
    }

    let n = (na + nb) as f64;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let variance = nn / 12.0 * ((n + 1.0) - tie_term);
    let (z, p) = if variance > 0.0 {
        let z = ((u - nn / 2.0 + 0.5) / variance.sqrt()).min(0.0);
        (z, erfc(-z / std::f64::consts::SQRT_2).min(1.0))
    } else {
        (0.0, 1.0)
    };
    Ok(RankTestResult {
        u_statistic: u,
        z_value: Some(z),
        p_two_sided: p,
        method: RankMethod::NormalApprox,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub kept_indices: Vec<usize>,
    pub kept_names: Vec<String>,
    /// p-values of the kept features, ascending.
    pub p_values: Vec<f64>,
    pub threshold: f64,
    pub k: usize,
}

/// Per-feature two-sided p-values comparing success and failure rows.
pub fn feature_p_values(ds: &Dataset) -> Result<Vec<f64>> {
    let [n0, n1] = ds.class_counts();
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleClass);
    }
    (0..ds.dim())
        .map(|j| {
            let (a, b) = split_column(ds, j);
            Ok(mann_whitney(&a, &b)?.p_two_sided)
        })
        .collect()
}

fn split_column(ds: &Dataset, j: usize) -> (Vec<f64>, Vec<f64>) {
    let mut success = Vec::new();
    let mut failure = Vec::new();
    for (row, label) in ds.rows.iter().zip(&ds.labels) {
        match label {
            Label::Success => success.push(row[j]),
            Label::Failure => failure.push(row[j]),
        }
    }
    (success, failure)
}

/// Keeps features with `p < threshold`, ascending by p (ties by column), at most `k`.
pub fn select_from_p_values(p_values: &[f64], names: &[String], threshold: f64, k: usize) -> Result<SelectionResult> {
    if k == 0 {
        return Err(Error::InvalidConfig("selection k must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..p_values.len()).filter(|&j| p_values[j] < threshold).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    order.truncate(k);
    Ok(SelectionResult {
        kept_names: order.iter().map(|&j| names[j].clone()).collect(),
        p_values: order.iter().map(|&j| p_values[j]).collect(),
        kept_indices: order,
        threshold,
        k,
    })
}

pub fn select_features(ds: &Dataset, threshold: f64, k: usize) -> Result<SelectionResult> {
    let p = feature_p_values(ds)?;
    select_from_p_values(&p, &ds.names, threshold, k)
}

/// Table-style summary of the kept features.
pub fn selection_report_csv(ds: &Dataset, sel: &SelectionResult, stamp: Option<&Stamp>) -> String {
    let mut out = String::new();
    if let Some(stamp) = stamp {
        out.push_str(&stamp.comment_line());
    }
    out.push_str("feature,success_mean,success_std,failure_mean,failure_std,p_value\n");
    for (&j, &p) in sel.kept_indices.iter().zip(&sel.p_values) {
        let (a, b) = split_column(ds, j);
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            ds.names[j],
            stats::mean(&a),
            stats::sample_std(&a),
            stats::mean(&b),
            stats::sample_std(&b),
            p
        ));
    }
    out
}

pub fn write_selection_report(path: &Path, ds: &Dataset, sel: &SelectionResult, stamp: Option<&Stamp>) -> Result<()> {
    crate::io::write_file(path, &selection_report_csv(ds, sel, stamp))
}

/// Reads the feature names (in file order) back from a selection report.
pub fn read_selection_report(path: &Path) -> Result<Vec<(String, f64)>> {
    let mut reader = crate::io::csv_reader(path)?;
    crate::io::expect_header(
        &mut reader,
        path,
        &[
            "feature",
            "success_mean",
            "success_std",
            "failure_mean",
            "failure_std",
            "p_value",
        ],
    )?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| crate::io::csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let p = record
            .get(5)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::MalformedRow {
                path: path.to_path_buf(),
                line,
                message: "invalid p_value".into(),
            })?;
        out.push((record[0].to_string(), p));
    }
    Ok(out)
}

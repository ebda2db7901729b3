//! Non-uniform time series and the wrangling procedure applied before
//! spectral analysis: null removal, outlier replacement, gap segmentation,
//! longest-segment selection and z-normalization.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::Stamp;
use crate::stats;

/// The eight breath-by-breath and beat-by-beat series recorded per patient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SignalKind {
    Rr,
    Ti,
    Te,
    Ttot,
    Vt,
    TiOverTtot,
    VtOverTi,
    FOverVt,
}

impl SignalKind {
    /// Canonical order used everywhere a per-signal layout is fixed.
    pub const ALL: [SignalKind; 8] = [
        SignalKind::Rr,
        SignalKind::Ti,
        SignalKind::Te,
        SignalKind::Ttot,
        SignalKind::Vt,
        SignalKind::TiOverTtot,
        SignalKind::VtOverTi,
        SignalKind::FOverVt,
    ];

    /// Notation used in feature names, e.g. `f/V_T`.
    pub fn short_name(self) -> &'static str {
        match self {
            SignalKind::Rr => "RR",
            SignalKind::Ti => "T_I",
            SignalKind::Te => "T_E",
            SignalKind::Ttot => "T_Tot",
            SignalKind::Vt => "V_T",
            SignalKind::TiOverTtot => "T_I/T_Tot",
            SignalKind::VtOverTi => "V_T/T_I",
            SignalKind::FOverVt => "f/V_T",
        }
    }

    /// File-system safe identifier, used as `<ident>.csv` in cohort directories.
    pub fn ident(self) -> &'static str {
        match self {
            SignalKind::Rr => "RR",
            SignalKind::Ti => "TI",
            SignalKind::Te => "TE",
            SignalKind::Ttot => "TTOT",
            SignalKind::Vt => "VT",
            SignalKind::TiOverTtot => "TI_OVER_TTOT",
            SignalKind::VtOverTi => "VT_OVER_TI",
            SignalKind::FOverVt => "F_OVER_VT",
        }
    }

    pub fn index(self) -> usize {
        SignalKind::ALL.iter().position(|&k| k == self).unwrap()
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for SignalKind {
    type Err = Error;

    /// Accepts either the identifier (`F_OVER_VT`) or the short name (`f/V_T`).
    fn from_str(s: &str) -> Result<Self> {
        SignalKind::ALL
            .into_iter()
            .find(|k| k.ident().eq_ignore_ascii_case(s) || k.short_name() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

/// Timestamped samples with strictly increasing, irregularly spaced times.
///
/// Values may contain NaN (nulls) until [`remove_nulls`] has been applied.
#[derive(Debug, Clone, PartialEq)]
pub struct NonUniformSeries {
    kind: SignalKind,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl NonUniformSeries {
    pub fn new(kind: SignalKind, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch {
                times: times.len(),
                values: values.len(),
            });
        }
        if times.is_empty() {
            return Err(Error::TooFewSamples { len: 0, min: 1 });
        }
        for (i, t) in times.iter().enumerate() {
            if !t.is_finite() || (i > 0 && *t <= times[i - 1]) {
                return Err(Error::NonIncreasingTimes { index: i });
            }
        }
        Ok(Self { kind, times, values })
    }

    pub fn kind(&self) -> SignalKind {
        self.kind
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn duration(&self) -> f64 {
        self.end() - self.start()
    }

    /// Contiguous sub-series `[from, to)`. Panics on an empty or out-of-range slice.
    pub fn slice(&self, from: usize, to: usize) -> NonUniformSeries {
        assert!(from < to && to <= self.len(), "invalid slice {from}..{to}");
        NonUniformSeries {
            kind: self.kind,
            times: self.times[from..to].to_vec(),
            values: self.values[from..to].to_vec(),
        }
    }

    /// Same times, new values. Lengths must match.
    pub fn with_values(&self, values: Vec<f64>) -> NonUniformSeries {
        assert_eq!(values.len(), self.times.len());
        NonUniformSeries {
            kind: self.kind,
            times: self.times.clone(),
            values,
        }
    }

    /// Median of consecutive time differences; `None` for a single sample.
    pub fn median_interval(&self) -> Option<f64> {
        if self.len() < 2 {
            return None;
        }
        let diffs: Vec<f64> = self.times.windows(2).map(|w| w[1] - w[0]).collect();
        Some(stats::median(&diffs))
    }
}

/// How the gap threshold for segmentation is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapThreshold {
    /// Multiple of the series' median inter-sample interval.
    MedianMultiple(f64),
    /// Fixed threshold in seconds.
    Seconds(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrangleConfig {
    pub outlier_z_threshold: f64,
    /// Number of non-flagged samples averaged on each side of an outlier.
    pub neighbor_radius: usize,
    pub gap_threshold: GapThreshold,
}

impl Default for WrangleConfig {
    fn default() -> Self {
        Self {
            outlier_z_threshold: 3.0,
            neighbor_radius: 5,
            gap_threshold: GapThreshold::MedianMultiple(5.0),
        }
    }
}

impl WrangleConfig {
    pub fn validate(&self) -> Result<()> {
        let gap_ok = match self.gap_threshold {
            GapThreshold::MedianMultiple(m) => m > 0.0 && m.is_finite(),
            GapThreshold::Seconds(s) => s > 0.0 && s.is_finite(),
        };
        if !(self.outlier_z_threshold > 0.0) || self.neighbor_radius == 0 || !gap_ok {
            return Err(Error::InvalidConfig(
                "wrangle parameters must be strictly positive".into(),
            ));
        }
        Ok(())
    }

    /// Resolves the gap threshold in seconds for a given series.
    pub fn gap_seconds(&self, series: &NonUniformSeries) -> f64 {
        match self.gap_threshold {
            GapThreshold::Seconds(s) => s,
            GapThreshold::MedianMultiple(m) => match series.median_interval() {
                Some(med) => m * med,
                None => f64::INFINITY,
            },
        }
    }
}

/// Drops every sample whose value is not finite.
pub fn remove_nulls(series: &NonUniformSeries) -> Result<NonUniformSeries> {
    let (times, values): (Vec<f64>, Vec<f64>) = series
        .times
        .iter()
        .zip(&series.values)
        .filter(|(_, v)| v.is_finite())
        .map(|(t, v)| (*t, *v))
        .unzip();
    if times.is_empty() {
        return Err(Error::EmptyResult);
    }
    Ok(NonUniformSeries {
        kind: series.kind,
        times,
        values,
    })
}

/// Indices whose global z-score exceeds the threshold. Empty for constant series.
pub fn outlier_flags(values: &[f64], threshold: f64) -> Vec<bool> {
    let mean = stats::mean(values);
    let std = stats::population_std(values);
    if std == 0.0 {
        return vec![false; values.len()];
    }
    values.iter().map(|v| (v - mean).abs() / std > threshold).collect()
}

/// Replaces global z-score outliers with the mean of up to `neighbor_radius`
/// non-flagged samples on each side.
pub fn replace_outliers(series: &NonUniformSeries, cfg: &WrangleConfig) -> Result<NonUniformSeries> {
    if series.len() < 2 {
        return Err(Error::TooFewSamples {
            len: series.len(),
            min: 2,
        });
    }
    let values = &series.values;
    let flags = outlier_flags(values, cfg.outlier_z_threshold);
    if !flags.contains(&true) {
        return Ok(series.clone());
    }

    let mut out = values.clone();
    for i in (0..values.len()).filter(|&i| flags[i]) {
        let left = (0..i).rev().filter(|&j| !flags[j]).take(cfg.neighbor_radius);
        let right = (i + 1..values.len()).filter(|&j| !flags[j]).take(cfg.neighbor_radius);
        let neighbors: Vec<f64> = left.chain(right).map(|j| values[j]).collect();
        out[i] = if neighbors.is_empty() {
            // every sample flagged: nothing local to borrow from
            stats::mean(values)
        } else {
            stats::mean(&neighbors)
        };
    }
    Ok(series.with_values(out))
}

/// Splits the series wherever consecutive samples are further apart than the gap threshold.
pub fn segment_gaps(series: &NonUniformSeries, cfg: &WrangleConfig) -> Vec<NonUniformSeries> {
    let threshold = cfg.gap_seconds(series);
    let mut segments = Vec::new();
    let mut start = 0;
    for i in 1..series.len() {
        if series.times[i] - series.times[i - 1] > threshold {
            segments.push(series.slice(start, i));
            start = i;
        }
    }
    segments.push(series.slice(start, series.len()));
    segments
}

/// Segment with the most samples; ties go to the earliest start.
pub fn longest_segment(segments: &[NonUniformSeries]) -> Option<&NonUniformSeries> {
    segments.iter().reduce(|best, s| {
        if s.len() > best.len() || (s.len() == best.len() && s.start() < best.start()) {
            s
        } else {
            best
        }
    })
}

/// Centers to zero mean and scales to unit population variance.
pub fn zscore_normalize(series: &NonUniformSeries) -> Result<NonUniformSeries> {
    if series.len() < 2 {
        return Err(Error::TooFewSamples {
            len: series.len(),
            min: 2,
        });
    }
    let mean = stats::mean(&series.values);
    let std = stats::population_std(&series.values);
    if std == 0.0 || !std.is_finite() {
        return Err(Error::ZeroVariance);
    }
    let values = series.values.iter().map(|v| (v - mean) / std).collect();
    Ok(series.with_values(values))
}

/// Full wrangling chain: nulls, outliers, gap segmentation, longest segment, z-score.
pub fn wrangle(series: &NonUniformSeries, cfg: &WrangleConfig) -> Result<NonUniformSeries> {
    cfg.validate()?;
    let cleaned = remove_nulls(series)?;
    let cleaned = replace_outliers(&cleaned, cfg)?;
    let segments = segment_gaps(&cleaned, cfg);
    let longest = longest_segment(&segments).expect("segmentation yields at least one segment");
    zscore_normalize(longest)
}

/// Reads a `time_s,value` CSV. Empty, `NaN`, `null` and `NA` values become NaN.
pub fn read_series_csv(path: &Path, kind: SignalKind) -> Result<NonUniformSeries> {
    let mut reader = crate::io::csv_reader(path)?;
    crate::io::expect_header(&mut reader, path, &["time_s", "value"])?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| crate::io::csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let malformed = |message: String| Error::MalformedRow {
            path: path.to_path_buf(),
            line,
            message,
        };
        if record.len() != 2 {
            return Err(malformed(format!("expected 2 fields, found {}", record.len())));
        }
        let time: f64 = record[0]
            .trim()
            .parse()
            .map_err(|_| malformed(format!("invalid time `{}`", &record[0])))?;
        let raw = record[1].trim();
        let value = match raw {
            "" | "NaN" | "nan" | "null" | "NULL" | "NA" => f64::NAN,
            _ => raw.parse().map_err(|_| malformed(format!("invalid value `{raw}`")))?,
        };
        if let Some(&prev) = times.last() {
            if time <= prev {
                return Err(malformed(format!("time {time} does not increase")));
            }
        }
        times.push(time);
        values.push(value);
    }
    if times.is_empty() {
        return Err(Error::MalformedRow {
            path: path.to_path_buf(),
            line: 1,
            message: "no samples".into(),
        });
    }
    NonUniformSeries::new(kind, times, values)
}

pub fn write_series_csv(path: &Path, series: &NonUniformSeries, stamp: Option<&Stamp>) -> Result<()> {
    let mut out = String::with_capacity(series.len() * 24);
    if let Some(stamp) = stamp {
        out.push_str(&stamp.comment_line());
    }
    out.push_str("time_s,value\n");
    for (t, v) in series.times.iter().zip(&series.values) {
        out.push_str(&format!("{t},{v}\n"));
    }
    crate::io::write_file(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn series(times: &[f64], values: &[f64]) -> NonUniformSeries {
        NonUniformSeries::new(SignalKind::FOverVt, times.to_vec(), values.to_vec()).unwrap()
    }

    fn gap(seconds: f64) -> WrangleConfig {
        WrangleConfig {
            gap_threshold: GapThreshold::Seconds(seconds),
            ..Default::default()
        }
    }

    /// Two-pass z-scores and neighbor means, written independently of `replace_outliers`.
    fn outlier_oracle(values: &[f64], threshold: f64, radius: usize) -> Vec<f64> {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        let flagged: Vec<usize> = (0..values.len())
            .filter(|&i| ((values[i] - mean) / sd).abs() > threshold)
            .collect();
        let mut out = values.to_vec();
        for &i in &flagged {
            let mut picked = Vec::new();
            let mut j = i;
            while j > 0 && picked.len() < radius {
                j -= 1;
                if !flagged.contains(&j) {
                    picked.push(values[j]);
                }
            }
            let mut right = 0;
            for k in i + 1..values.len() {
                if right == radius {
                    break;
                }
                if !flagged.contains(&k) {
                    picked.push(values[k]);
                    right += 1;
                }
            }
            out[i] = picked.iter().sum::<f64>() / picked.len() as f64;
        }
        out
    }

    #[test]
    fn kind_names_round_trip() {
        assert_eq!(SignalKind::ALL.len(), 8);
        for k in SignalKind::ALL {
            assert_eq!(k.ident().parse::<SignalKind>().unwrap(), k);
            assert_eq!(k.short_name().parse::<SignalKind>().unwrap(), k);
        }
        assert_eq!(SignalKind::FOverVt.short_name(), "f/V_T");
        assert!("XYZ".parse::<SignalKind>().is_err());
    }

    #[test]
    fn rejects_non_increasing_times() {
        let err = NonUniformSeries::new(SignalKind::Rr, vec![0.0, 1.0, 1.0], vec![1.0; 3]);
        assert!(matches!(err, Err(Error::NonIncreasingTimes { index: 2 })));
    }

    #[test]
    fn remove_nulls_drops_nan() {
        let s = series(&[0.0, 1.0, 2.0], &[1.0, f64::NAN, 3.0]);
        let out = remove_nulls(&s).unwrap();
        assert_eq!(out.times(), &[0.0, 2.0]);
        assert_eq!(out.values(), &[1.0, 3.0]);

        let clean = series(&[0.0, 1.0], &[4.0, 5.0]);
        assert_eq!(remove_nulls(&clean).unwrap(), clean);

        let all_nan = series(&[0.0, 1.0], &[f64::NAN, f64::NAN]);
        assert!(matches!(remove_nulls(&all_nan), Err(Error::EmptyResult)));
    }

    #[test]
    fn constant_series_has_no_outliers() {
        let s = series(&[0.0, 1.0, 2.0, 3.0], &[2.0; 4]);
        assert_eq!(replace_outliers(&s, &WrangleConfig::default()).unwrap(), s);
    }

    #[test]
    fn small_spike_against_oracle() {
        // With n = 5 the largest attainable z-score is 2, so a threshold of 3 flags nothing.
        let v = [1.0, 1.0, 1.0, 1.0, 50.0];
        let s = series(&[0.0, 1.0, 2.0, 3.0, 4.0], &v);
        let cfg = WrangleConfig::default();
        let out = replace_outliers(&s, &cfg).unwrap();
        assert_eq!(out.values(), outlier_oracle(&v, 3.0, 5).as_slice());
        assert_eq!(out.values(), &v);

        let cfg = WrangleConfig {
            outlier_z_threshold: 1.5,
            ..cfg
        };
        let out = replace_outliers(&s, &cfg).unwrap();
        assert_eq!(out.values(), outlier_oracle(&v, 1.5, 5).as_slice());
        assert_eq!(out.values()[4], 1.0);
    }

    #[test]
    fn injected_spike_is_replaced() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut v: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
        v[40] += 20.0;
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.9).collect();
        let s = series(&t, &v);
        let out = replace_outliers(&s, &WrangleConfig::default()).unwrap();
        let expected = outlier_oracle(&v, 3.0, 5);
        assert_eq!(out.values(), expected.as_slice());
        for i in 0..100 {
            if i == 40 {
                assert_ne!(out.values()[i], v[i]);
            } else {
                assert_eq!(out.values()[i], v[i]);
            }
        }
        assert_eq!(out.times(), s.times());
    }

    #[test]
    fn segment_examples() {
        let s = series(&[0.0, 1.0, 2.0, 10.0, 11.0], &[1.0; 5]);
        let segs = segment_gaps(&s, &gap(5.0));
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].times(), &[0.0, 1.0, 2.0]);
        assert_eq!(segs[1].times(), &[10.0, 11.0]);

        let s = series(&[0.0, 1.0, 2.0], &[1.0; 3]);
        assert_eq!(segment_gaps(&s, &gap(5.0)), vec![s.clone()]);

        let s = series(&[0.0, 10.0, 20.0], &[1.0; 3]);
        let segs = segment_gaps(&s, &gap(5.0));
        assert_eq!(segs.len(), 3);
        assert!(segs.iter().all(|s| s.len() == 1));
    }

    #[test]
    fn default_gap_uses_median_interval() {
        // median interval 1 s -> threshold 5 s
        let s = series(&[0.0, 1.0, 2.0, 3.0, 9.0, 10.0], &[1.0; 6]);
        let segs = segment_gaps(&s, &WrangleConfig::default());
        assert_eq!(segs.len(), 2);
    }

    #[test]
    fn longest_segment_rules() {
        let a = series(&[0.0, 1.0, 2.0], &[1.0; 3]);
        let b = series(&[10.0, 11.0], &[1.0; 2]);
        assert_eq!(longest_segment(&[a.clone(), b.clone()]).unwrap(), &a);

        let c = series(&[0.0, 1.0], &[1.0; 2]);
        assert_eq!(longest_segment(&[b.clone(), c.clone()]).unwrap(), &c);
        assert_eq!(longest_segment(std::slice::from_ref(&b)).unwrap(), &b);
        assert!(longest_segment(&[]).is_none());
    }

    #[test]
    fn zscore_examples() {
        let s = series(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0]);
        let out = zscore_normalize(&s).unwrap();
        let expected = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((out.values()[0] + expected).abs() < 1e-12);
        assert!(out.values()[1].abs() < 1e-12);
        assert!((out.values()[2] - expected).abs() < 1e-12);

        let again = zscore_normalize(&out).unwrap();
        for (a, b) in again.values().iter().zip(out.values()) {
            assert!((a - b).abs() < 1e-12);
        }

        let flat = series(&[0.0, 1.0], &[3.0, 3.0]);
        assert!(matches!(zscore_normalize(&flat), Err(Error::ZeroVariance)));
    }

    #[test]
    fn wrangle_clean_series_is_outlier_then_zscore() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 1.3).collect();
        let v: Vec<f64> = (0..50).map(|i| (i as f64 * 0.4).sin() + 2.0).collect();
        let s = series(&t, &v);
        let cfg = WrangleConfig::default();
        let expected = zscore_normalize(&replace_outliers(&s, &cfg).unwrap()).unwrap();
        assert_eq!(wrangle(&s, &cfg).unwrap(), expected);
    }

    #[test]
    fn wrangle_matches_manual_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut t = Vec::new();
        let mut now = 0.0;
        for i in 0..120 {
            now += if i == 30 { 40.0 } else { 2.0 + 0.5 * (i as f64).sin() };
            t.push(now);
        }
        let mut v: Vec<f64> = (0..120).map(|_| StandardNormal.sample(&mut rng)).collect();
        v[70] = f64::NAN;
        v[90] = 6.0;
        let s = series(&t, &v);
        let cfg = WrangleConfig::default();

        let step1 = remove_nulls(&s).unwrap();
        let step2 = replace_outliers(&step1, &cfg).unwrap();
        let segs = segment_gaps(&step2, &cfg);
        assert_eq!(segs.len(), 2);
        let step4 = longest_segment(&segs).unwrap();
        let manual = zscore_normalize(step4).unwrap();

        let out = wrangle(&s, &cfg).unwrap();
        assert_eq!(out, manual);
        assert_eq!(out.len(), 89);
        assert!(out.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn wrangle_all_null_is_error() {
        let s = series(&[0.0, 1.0], &[f64::NAN, f64::NAN]);
        assert!(matches!(
            wrangle(&s, &WrangleConfig::default()),
            Err(Error::EmptyResult)
        ));
    }

    fn arb_series() -> impl Strategy<Value = NonUniformSeries> {
        prop::collection::vec((0.05f64..20.0, -100.0f64..100.0), 2..80).prop_map(|pairs| {
            let mut t = 0.0;
            let mut times = Vec::new();
            let mut values = Vec::new();
            for (dt, v) in pairs {
                t += dt;
                times.push(t);
                values.push(v);
            }
            NonUniformSeries::new(SignalKind::Vt, times, values).unwrap()
        })
    }

    proptest! {
        #[test]
        fn segments_concatenate_to_input(s in arb_series(), thr in 0.1f64..30.0) {
            let cfg = gap(thr);
            let segs = segment_gaps(&s, &cfg);
            let times: Vec<f64> = segs.iter().flat_map(|x| x.times().to_vec()).collect();
            let values: Vec<f64> = segs.iter().flat_map(|x| x.values().to_vec()).collect();
            prop_assert_eq!(times.as_slice(), s.times());
            prop_assert_eq!(values.as_slice(), s.values());
            for seg in &segs {
                prop_assert!(seg.times().windows(2).all(|w| w[1] - w[0] <= thr));
            }
            for pair in segs.windows(2) {
                prop_assert!(pair[1].start() - pair[0].end() > thr);
            }
        }

        #[test]
        fn zscore_moments(s in arb_series()) {
            prop_assume!(stats::population_std(s.values()) > 1e-6);
            let out = zscore_normalize(&s).unwrap();
            prop_assert!(stats::mean(out.values()).abs() <= 1e-12);
            prop_assert!((stats::population_std(out.values()) - 1.0).abs() <= 1e-12);
            prop_assert_eq!(out.times(), s.times());
        }

        #[test]
        fn outliers_touch_only_flagged_values(s in arb_series(), thr in 0.5f64..4.0) {
            let cfg = WrangleConfig { outlier_z_threshold: thr, ..Default::default() };
            let out = replace_outliers(&s, &cfg).unwrap();
            let flags = outlier_flags(s.values(), thr);
            prop_assert_eq!(out.times(), s.times());
            for i in 0..s.len() {
                if !flags[i] {
                    prop_assert_eq!(out.values()[i], s.values()[i]);
                }
            }
            if !flags.contains(&true) {
                prop_assert_eq!(&out, &s);
            }
        }

        #[test]
        fn wrangle_is_deterministic(s in arb_series()) {
            let cfg = WrangleConfig::default();
            let a = wrangle(&s, &cfg);
            let b = wrangle(&s, &cfg);
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    let bits_a: Vec<u64> = a.values().iter().map(|v| v.to_bits()).collect();
                    let bits_b: Vec<u64> = b.values().iter().map(|v| v.to_bits()).collect();
                    prop_assert_eq!(bits_a, bits_b);
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "non-deterministic outcome"),
            }
        }
    }
}

//! Cohort ingestion and generation, the interpolation-artifact comparison, and
//! the end-to-end run that writes every artifact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::bayesopt::{optimize_svm, BoConfig, SvmSearch};
use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::eval::{repeated_cv, stratified_kfold, CvConfig, EvalReport};
use crate::features::{assemble_features, FeatureVector, FrameFeatures};
use crate::io::{write_file, Stamp};
use crate::nudft::{
    nudft, resample_uniform, spectrogram, uniform_periodogram, FrequencyGrid, Interpolation, SpectrogramConfig,
};
use crate::rng::{derive_seed, seeded};
use crate::select::{select_features, write_selection_report, SelectionResult};
use crate::series::{
    read_series_csv, wrangle, write_series_csv, GapThreshold, NonUniformSeries, SignalKind, WrangleConfig,
};
use crate::svm::{fit_model, KernelSpec, SelectionRule, SmoConfig, TrainedModel};

/// One patient: outcome label and all eight series.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub patient_id: String,
    pub label: Label,
    pub series: BTreeMap<SignalKind, NonUniformSeries>,
}

impl PatientRecord {
    pub fn new(patient_id: String, label: Label, series: BTreeMap<SignalKind, NonUniformSeries>) -> Result<Self> {
        for kind in SignalKind::ALL {
            if !series.contains_key(&kind) {
                return Err(Error::MissingSignal(kind.short_name().to_string()));
            }
        }
        Ok(Self {
            patient_id,
            label,
            series,
        })
    }
}

/// All run parameters. Rendered canonically for hashing and for the
/// `key = value` config file format.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub wrangle: WrangleConfig,
    pub spectrogram: SpectrogramConfig,
    pub selection: SelectionRule,
    pub cv_repetitions: usize,
    pub cv_folds: usize,
    pub bo_iterations: usize,
    pub bo_init_random: usize,
    pub bo_candidates: usize,
    pub smo_tol: f64,
    pub smo_max_passes: usize,
    pub synth_success: usize,
    pub synth_failure: usize,
    pub synth_difficulty: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            wrangle: WrangleConfig::default(),
            spectrogram: SpectrogramConfig::default(),
            selection: SelectionRule::default(),
            cv_repetitions: crate::eval::DEFAULT_REPETITIONS,
            cv_folds: crate::eval::DEFAULT_FOLDS,
            bo_iterations: crate::bayesopt::DEFAULT_ITERATIONS,
            bo_init_random: crate::bayesopt::DEFAULT_INIT_RANDOM,
            bo_candidates: crate::bayesopt::DEFAULT_CANDIDATES,
            smo_tol: 1e-3,
            smo_max_passes: 10,
            synth_success: 94,
            synth_failure: 60,
            synth_difficulty: 0.0,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("invalid value `{value}` for `{key}`")))
}

impl RunConfig {
    /// Defaults with 15 cross-validation repetitions instead of 150.
    pub fn ci_profile() -> Self {
        Self {
            cv_repetitions: 15,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.wrangle.validate()?;
        self.spectrogram.validate()?;
        if self.selection.k == 0 || !(self.selection.threshold > 0.0) {
            return Err(Error::InvalidConfig(
                "select.k and select.threshold must be positive".into(),
            ));
        }
        if self.cv_repetitions == 0 || self.cv_folds < 2 {
            return Err(Error::InvalidConfig(
                "cv.repetitions >= 1 and cv.folds >= 2 required".into(),
            ));
        }
        if self.bo_init_random == 0 || self.bo_iterations < self.bo_init_random || self.bo_candidates == 0 {
            return Err(Error::InvalidConfig(
                "bo.iterations >= bo.init_random >= 1 required".into(),
            ));
        }
        if !(self.smo_tol > 0.0) || self.smo_max_passes == 0 {
            return Err(Error::InvalidConfig(
                "svm.tol and svm.max_passes must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.synth_difficulty) {
            return Err(Error::InvalidConfig("synth.difficulty must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_value(key, value)?,
            "wrangle.outlier_z" => self.wrangle.outlier_z_threshold = parse_value(key, value)?,
            "wrangle.neighbor_radius" => self.wrangle.neighbor_radius = parse_value(key, value)?,
            "wrangle.gap_threshold" => {
                self.wrangle.gap_threshold = if let Some(m) = value.strip_suffix("xmedian") {
                    GapThreshold::MedianMultiple(parse_value(key, m)?)
                } else if let Some(s) = value.strip_suffix('s') {
                    GapThreshold::Seconds(parse_value(key, s)?)
                } else {
                    return Err(Error::InvalidConfig(format!(
                        "`{key}` takes `<n>xmedian` or `<seconds>s`, got `{value}`"
                    )));
                }
            }
            "spectrogram.window_s" => self.spectrogram.window_s = parse_value(key, value)?,
            "spectrogram.overlap" => self.spectrogram.overlap_fraction = parse_value(key, value)?,
            "spectrogram.bins" => self.spectrogram.bins = parse_value(key, value)?,
            "spectrogram.min_samples" => self.spectrogram.min_samples_per_frame = parse_value(key, value)?,
            "select.threshold" => self.selection.threshold = parse_value(key, value)?,
            "select.k" => self.selection.k = parse_value(key, value)?,
            "cv.repetitions" => self.cv_repetitions = parse_value(key, value)?,
            "cv.folds" => self.cv_folds = parse_value(key, value)?,
            "bo.iterations" => self.bo_iterations = parse_value(key, value)?,
            "bo.init_random" => self.bo_init_random = parse_value(key, value)?,
            "bo.candidates" => self.bo_candidates = parse_value(key, value)?,
            "svm.tol" => self.smo_tol = parse_value(key, value)?,
            "svm.max_passes" => self.smo_max_passes = parse_value(key, value)?,
            "synth.n_success" => self.synth_success = parse_value(key, value)?,
            "synth.n_failure" => self.synth_failure = parse_value(key, value)?,
            "synth.difficulty" => self.synth_difficulty = parse_value(key, value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::MissingFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_text(&text)
    }

    /// One `key = value` line per parameter in a fixed order.
    pub fn canonical(&self) -> String {
        let gap = match self.wrangle.gap_threshold {
            GapThreshold::MedianMultiple(m) => format!("{m}xmedian"),
            GapThreshold::Seconds(s) => format!("{s}s"),
        };
        let pairs: [(&str, String); 20] = [
            ("seed", self.seed.to_string()),
            ("wrangle.outlier_z", self.wrangle.outlier_z_threshold.to_string()),
            ("wrangle.neighbor_radius", self.wrangle.neighbor_radius.to_string()),
            ("wrangle.gap_threshold", gap),
            ("spectrogram.window_s", self.spectrogram.window_s.to_string()),
            ("spectrogram.overlap", self.spectrogram.overlap_fraction.to_string()),
            ("spectrogram.bins", self.spectrogram.bins.to_string()),
            (
                "spectrogram.min_samples",
                self.spectrogram.min_samples_per_frame.to_string(),
            ),
            ("select.threshold", self.selection.threshold.to_string()),
            ("select.k", self.selection.k.to_string()),
            ("cv.repetitions", self.cv_repetitions.to_string()),
            ("cv.folds", self.cv_folds.to_string()),
            ("bo.iterations", self.bo_iterations.to_string()),
            ("bo.init_random", self.bo_init_random.to_string()),
            ("bo.candidates", self.bo_candidates.to_string()),
            ("svm.tol", self.smo_tol.to_string()),
            ("svm.max_passes", self.smo_max_passes.to_string()),
            ("synth.n_success", self.synth_success.to_string()),
            ("synth.n_failure", self.synth_failure.to_string()),
            ("synth.difficulty", self.synth_difficulty.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Hex SHA-256 of [`RunConfig::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn stamp(&self) -> Stamp {
        Stamp {
            config_hash: self.hash(),
            seed: self.seed,
        }
    }

    pub fn smo(&self) -> SmoConfig {
        SmoConfig {
            tol: self.smo_tol,
            seed: derive_seed(self.seed, 3),
            max_passes: self.smo_max_passes,
        }
    }

    pub fn bo(&self) -> BoConfig {
        BoConfig {
            iterations: self.bo_iterations,
            init_random: self.bo_init_random,
            candidates: self.bo_candidates,
            seed: derive_seed(self.seed, 1),
        }
    }

    pub fn cv(&self) -> CvConfig {
        CvConfig {
            repetitions: self.cv_repetitions,
            folds: self.cv_folds,
            seed: derive_seed(self.seed, 2),
            selection: self.selection,
            smo: self.smo(),
        }
    }
}

/// Reads a `patient_id,label,series_dir` manifest. Each directory (relative to
/// the manifest) must hold exactly the eight `<IDENT>.csv` series files.
pub fn ingest_cohort(manifest: &Path) -> Result<Vec<PatientRecord>> {
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut reader = crate::io::csv_reader(manifest)?;
    crate::io::expect_header(&mut reader, manifest, &["patient_id", "label", "series_dir"])?;
    let mut records: Vec<PatientRecord> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| crate::io::csv_error(manifest, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let malformed = |message: String| Error::MalformedRow {
            path: manifest.to_path_buf(),
            line,
            message,
        };
        if record.len() != 3 {
            return Err(malformed(format!("expected 3 fields, found {}", record.len())));
        }
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(malformed("empty patient_id".into()));
        }
        if records.iter().any(|r| r.patient_id == id) {
            return Err(Error::DuplicatePatient(id));
        }
        let label = record[1]
            .trim()
            .parse::<u8>()
            .ok()
            .and_then(Label::from_u8)
            .ok_or_else(|| malformed(format!("invalid label `{}`", &record[1])))?;
        let dir = base.join(record[2].trim());
        let entries = std::fs::read_dir(&dir).map_err(|e| Error::MissingFile {
            path: dir.clone(),
            message: e.to_string(),
        })?;
        let mut names: Vec<String> = Vec::new();
        for entry in entries {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "csv") {
                if let Some(stem) = path.file_stem() {
                    names.push(stem.to_string_lossy().into_owned());
                }
            }
        }
        names.sort();
        for stem in &names {
            stem.parse::<SignalKind>()?;
        }
        let mut series = BTreeMap::new();
        for kind in SignalKind::ALL {
            let path = dir.join(format!("{}.csv", kind.ident()));
            if !path.is_file() {
                return Err(Error::MissingFile {
                    path,
                    message: "series file not found".into(),
                });
            }
            series.insert(kind, read_series_csv(&path, kind)?);
        }
        records.push(PatientRecord::new(id, label, series)?);
    }
    Ok(records)
}

/// Writes `manifest.csv` plus `patients/<id>/<IDENT>.csv` under `dir`.
pub fn write_cohort(dir: &Path, records: &[PatientRecord], stamp: Option<&Stamp>) -> Result<PathBuf> {
    let mut manifest = String::new();
    if let Some(stamp) = stamp {
        manifest.push_str(&stamp.comment_line());
    }
    manifest.push_str("patient_id,label,series_dir\n");
    for r in records {
        let rel = format!("patients/{}", r.patient_id);
        let _ = writeln!(manifest, "{},{},{}", r.patient_id, r.label, rel);
        for (kind, s) in &r.series {
            write_series_csv(&dir.join(&rel).join(format!("{}.csv", kind.ident())), s, stamp)?;
        }
    }
    let path = dir.join("manifest.csv");
    write_file(&path, &manifest)?;
    Ok(path)
}

/// Nominal synthetic recording length in seconds.
pub const SYNTH_DURATION_S: f64 = 900.0;

/// Generates a labelled cohort of breath-by-breath and beat-by-beat series.
///
/// Each patient has an irregularity level `r` in [0, 1]. Every series is a
/// slowly modulated baseline whose modulation mixes a tone (weight `1 − r`)
/// with white noise (weight `r`); the tone's frequency also wanders in
/// proportion to `r`. Success patients centre on `r = 0.5 − 0.4·(1 − d)` and
/// failures on `r = 0.5 + 0.4·(1 − d)`, with `d = difficulty`, so `d = 0`
/// separates the classes and `d = 1` makes them identical in distribution.
/// Each series also receives an apnea gap near the start, isolated spikes and
/// missing values.
pub fn synth_cohort(n_success: usize, n_failure: usize, seed: u64, difficulty: f64) -> Result<Vec<PatientRecord>> {
    if n_success == 0 || n_failure == 0 {
        return Err(Error::InvalidConfig(
            "synthetic cohort needs at least one patient per class".into(),
        ));
    }
    if !(0.0..=1.0).contains(&difficulty) {
        return Err(Error::InvalidConfig(format!("difficulty {difficulty} outside [0, 1]")));
    }
    let labels: Vec<Label> = std::iter::repeat_n(Label::Success, n_success)
        .chain(std::iter::repeat_n(Label::Failure, n_failure))
        .collect();
    labels
        .par_iter()
        .enumerate()
        .map(|(i, &label)| synth_patient(format!("P{:03}", i + 1), label, difficulty, derive_seed(seed, i as u64)))
        .collect()
}

struct Modulation {
    freq: f64,
    phase: f64,
}

impl Modulation {
    fn new<R: Rng>(rng: &mut R, freq_range: std::ops::Range<f64>) -> Self {
        let freq = rng.random_range(freq_range);
        Self {
            freq,
            phase: rng.random_range(0.0..std::f64::consts::TAU),
        }
    }

    /// Current value, then advances the phase by `dt` seconds.
    fn step<R: Rng>(&mut self, rng: &mut R, r: f64, dt: f64) -> f64 {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let value = (1.0 - r) * self.phase.sin() + r * 1.2 * normal.sample(rng);
        let wander = 1.0 + 0.6 * r * normal.sample(rng).clamp(-2.0, 2.0);
        self.phase += std::f64::consts::TAU * self.freq * dt * wander;
        value
    }
}

fn synth_patient(id: String, label: Label, difficulty: f64, seed: u64) -> Result<PatientRecord> {
    let mut rng = seeded(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let sign = if label.is_positive() { 1.0 } else { -1.0 };
    let r = (0.5 + sign * 0.4 * (1.0 - difficulty) + rng.random_range(-0.1..0.1)).clamp(0.0, 1.0);

    let period = 3.0 * rng.random_range(0.85..1.15);
    let mut m_period = Modulation::new(&mut rng, 0.015..0.06);
    let mut m_ti = Modulation::new(&mut rng, 0.015..0.06);
    let mut m_vt = Modulation::new(&mut rng, 0.015..0.06);

    let mut breaths: BTreeMap<SignalKind, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut t = 0.0;
    while t < SYNTH_DURATION_S {
        let ttot = period * (1.0 + 0.12 * m_period.step(&mut rng, r, period) + 0.02 * normal.sample(&mut rng));
        let ti = ttot * 0.4 * (1.0 + 0.08 * m_ti.step(&mut rng, r, ttot));
        let vt = 0.5 * (1.0 + 0.2 * m_vt.step(&mut rng, r, ttot));
        t += ttot;
        let values = [
            (SignalKind::Ti, ti),
            (SignalKind::Te, ttot - ti),
            (SignalKind::Ttot, ttot),
            (SignalKind::Vt, vt),
            (SignalKind::TiOverTtot, ti / ttot),
            (SignalKind::VtOverTi, vt / ti),
            (SignalKind::FOverVt, 60.0 / ttot / vt),
        ];
        for (kind, v) in values {
            let entry = breaths.entry(kind).or_default();
            entry.0.push(t);
            entry.1.push(v);
        }
    }

    let beat = 0.8 * rng.random_range(0.9..1.1);
    let mut m_rr = Modulation::new(&mut rng, 1.0 / period..1.0 / period + 1e-9);
    let (mut rr_t, mut rr_v) = (Vec::new(), Vec::new());
    let mut t = 0.0;
    while t < SYNTH_DURATION_S {
        let rr = beat * (1.0 + 0.05 * m_rr.step(&mut rng, r, beat));
        t += rr;
        rr_t.push(t);
        rr_v.push(rr);
    }
    breaths.insert(SignalKind::Rr, (rr_t, rr_v));

    let gap_start = rng.random_range(15.0..30.0);
    let gap_end = gap_start + 60.0;
    let mut series = BTreeMap::new();
    for kind in SignalKind::ALL {
        let (times, values) = breaths.remove(&kind).unwrap();
        let mean = crate::stats::mean(&values);
        let sd = crate::stats::population_std(&values);
        let (mut kt, mut kv) = (Vec::new(), Vec::new());
        for (t, v) in times.into_iter().zip(values) {
            if t > gap_start && t < gap_end {
                continue;
            }
            let u: f64 = rng.random();
            let v = if u < 0.01 {
                f64::NAN
            } else if u < 0.015 {
                mean + 12.0 * sd * if rng.random::<bool>() { 1.0 } else { -1.0 }
            } else {
                v
            };
            kt.push(t);
            kv.push(v);
        }
        series.insert(kind, NonUniformSeries::new(kind, kt, kv)?);
    }
    PatientRecord::new(id, label, series)
}

/// Wrangles one series and computes its per-frame spectral features.
pub fn series_trajectory(
    series: &NonUniformSeries,
    wrangle_cfg: &WrangleConfig,
    spec_cfg: &SpectrogramConfig,
) -> Result<Vec<FrameFeatures>> {
    let clean = wrangle(series, wrangle_cfg)?;
    spectrogram(&clean, spec_cfg)?
        .iter()
        .map(|f| FrameFeatures::compute(&f.spectrum))
        .collect()
}

pub fn patient_features(record: &PatientRecord, cfg: &RunConfig) -> Result<FeatureVector> {
    let mut trajectories = BTreeMap::new();
    for (kind, s) in &record.series {
        trajectories.insert(*kind, series_trajectory(s, &cfg.wrangle, &cfg.spectrogram)?);
    }
    assemble_features(&trajectories, &record.patient_id, record.label)
}

/// Feature matrix for a cohort, computed per patient in parallel.
pub fn extract_features(records: &[PatientRecord], cfg: &RunConfig) -> Result<Dataset> {
    let vectors: Vec<FeatureVector> = records
        .par_iter()
        .map(|r| patient_features(r, cfg))
        .collect::<Result<_>>()?;
    Dataset::from_vectors(&vectors)
}

/// Mean sampling rate `(N − 1) / duration`.
pub fn mean_rate(series: &NonUniformSeries) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::TooFewSamples {
            len: series.len(),
            min: 2,
        });
    }
    Ok((series.len() - 1) as f64 / series.duration())
}

/// Grid of `bins` frequencies reaching 1.25 times the sampling rate.
pub fn comparison_grid(rate_hz: f64, bins: usize) -> Result<FrequencyGrid> {
    FrequencyGrid::new(1.25 * rate_hz / bins as f64, bins)
}

/// Aligned PSDs of the direct transform and the two interpolation baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpComparison {
    pub rate_hz: f64,
    pub frequencies: Vec<f64>,
    pub nudft: Vec<f64>,
    pub linear: Vec<f64>,
    pub spline: Vec<f64>,
    /// Mean interpolated PSD over mean direct PSD on the lowest grid quartile.
    pub attenuation_linear: Option<f64>,
    pub attenuation_spline: Option<f64>,
    /// Interpolated PSD near the sampling rate over the direct PSD there.
    pub artifact_linear: Option<f64>,
    pub artifact_spline: Option<f64>,
    /// Direct PSD near the sampling rate over its median on the upper half of the grid.
    pub nudft_prominence: Option<f64>,
}

fn mean_over(psd: &[f64], bins: &[usize]) -> f64 {
    bins.iter().map(|&k| psd[k]).sum::<f64>() / bins.len() as f64
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0 && num.is_finite()).then(|| num / den)
}

pub fn compare_interpolation(
    series: &NonUniformSeries,
    rate_hz: f64,
    grid: &FrequencyGrid,
) -> Result<InterpComparison> {
    let direct = nudft(series, grid, None)?;
    let linear = uniform_periodogram(&resample_uniform(series, rate_hz, Interpolation::Linear)?, grid)?;
    let spline = uniform_periodogram(&resample_uniform(series, rate_hz, Interpolation::CubicSpline)?, grid)?;

    let m = grid.len();
    let low: Vec<usize> = (0..(m / 4).max(1)).collect();
    let freqs = grid.frequencies();
    let near: Vec<usize> = (0..m)
        .filter(|&k| (freqs[k] - rate_hz).abs() <= 2.0 * grid.step() + 1e-12 * rate_hz)
        .collect();
    let upper: Vec<f64> = direct.psd[m / 2..].to_vec();

    let low_direct = mean_over(&direct.psd, &low);
    let (near_direct, near_linear, near_spline) = if near.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (
            mean_over(&direct.psd, &near),
            mean_over(&linear.psd, &near),
            mean_over(&spline.psd, &near),
        )
    };
    Ok(InterpComparison {
        rate_hz,
        frequencies: freqs.to_vec(),
        attenuation_linear: ratio(mean_over(&linear.psd, &low), low_direct),
        attenuation_spline: ratio(mean_over(&spline.psd, &low), low_direct),
        artifact_linear: ratio(near_linear, near_direct),
        artifact_spline: ratio(near_spline, near_direct),
        nudft_prominence: ratio(near_direct, crate::stats::median(&upper)),
        nudft: direct.psd,
        linear: linear.psd,
        spline: spline.psd,
    })
}

impl InterpComparison {
    /// `frequency_hz,nudft_psd,linear_psd,spline_psd`
    pub fn psd_csv(&self, stamp: Option<&Stamp>) -> String {
        let mut out = String::new();
        if let Some(stamp) = stamp {
            out.push_str(&stamp.comment_line());
        }
        out.push_str("frequency_hz,nudft_psd,linear_psd,spline_psd\n");
        for k in 0..self.frequencies.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.frequencies[k], self.nudft[k], self.linear[k], self.spline[k]
            );
        }
        out
    }

    /// `diagnostic,value`; undefined ratios are written as `undefined`.
    pub fn diagnostics_csv(&self, stamp: Option<&Stamp>) -> String {
        let mut out = String::new();
        if let Some(stamp) = stamp {
            out.push_str(&stamp.comment_line());
        }
        out.push_str("diagnostic,value\n");
        let rows = [
            ("rate_hz", Some(self.rate_hz)),
            ("attenuation_linear", self.attenuation_linear),
            ("attenuation_spline", self.attenuation_spline),
            ("artifact_linear", self.artifact_linear),
            ("artifact_spline", self.artifact_spline),
            ("nudft_prominence", self.nudft_prominence),
        ];
        for (name, v) in rows {
            match v {
                Some(v) => {
                    let _ = writeln!(out, "{name},{v}");
                }
                None => {
                    let _ = writeln!(out, "{name},undefined");
                }
            }
        }
        out
    }
}

/// Jittered renewal-process samples of `offset + sin(2π·f0·t) + noise`.
///
/// Intervals are `nominal_dt·(1 + U(−jitter, jitter))`.
pub fn jittered_test_signal(
    seed: u64,
    samples: usize,
    nominal_dt: f64,
    jitter: f64,
    f0: f64,
    offset: f64,
    noise_sd: f64,
) -> Result<NonUniformSeries> {
    let mut rng = seeded(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut t = 0.0;
    let mut times = Vec::with_capacity(samples);
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        times.push(t);
        values.push(offset + (std::f64::consts::TAU * f0 * t).sin() + noise_sd * normal.sample(&mut rng));
        t += nominal_dt * (1.0 + rng.random_range(-jitter..=jitter));
    }
    NonUniformSeries::new(SignalKind::Vt, times, values)
}

/// Output of the modelling stages.
#[derive(Debug, Clone)]
pub struct ModelRun {
    pub selection: SelectionResult,
    pub search: SvmSearch,
    pub best_spec: KernelSpec,
    /// Higher-ranked specs whose cross-validation or final fit did not converge.
    pub rejected: Vec<(KernelSpec, String)>,
    pub report: EvalReport,
    pub model: TrainedModel,
}

/// Cohort-level selection report, hyperparameter search, repeated CV with the
/// best spec and a final model fitted on every patient.
///
/// If the best spec fails to converge on some fold or on the full cohort, the
/// next-ranked successful spec is used and the failure listed in `rejected`.
pub fn model_and_evaluate(ds: &Dataset, cfg: &RunConfig) -> Result<ModelRun> {
    stratified_kfold(&ds.labels, cfg.cv_folds, 0).map_err(|e| e.in_stage("validate"))?;
    let selection = select_features(ds, cfg.selection.threshold, cfg.selection.k).map_err(|e| e.in_stage("select"))?;
    let search = optimize_svm(ds, &cfg.bo(), &cfg.selection, &cfg.smo()).map_err(|e| e.in_stage("optimize"))?;
    let ranked = search.ranked_specs();
    if ranked.is_empty() {
        return Err(Error::InvalidConfig("every hyperparameter evaluation failed".into()).in_stage("optimize"));
    }
    let mut rejected = Vec::new();
    let mut last_err = None;
    for (spec, _) in ranked {
        let attempt = repeated_cv(ds, &spec, &cfg.cv())
            .and_then(|report| Ok((report, fit_model(ds, &spec, &cfg.selection, &cfg.smo())?)));
        match attempt {
            Ok((report, model)) => {
                return Ok(ModelRun {
                    selection,
                    search,
                    best_spec: spec,
                    rejected,
                    report,
                    model,
                })
            }
            Err(e) if matches!(e.root(), Error::NonConvergence { .. }) => {
                rejected.push((spec, e.to_string()));
                last_err = Some(e);
            }
            Err(e) => return Err(e.in_stage("evaluate")),
        }
    }
    Err(last_err.expect("at least one ranked spec").in_stage("evaluate"))
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dataset: Dataset,
    pub run: ModelRun,
    pub artifacts: Vec<PathBuf>,
}

pub const FEATURES_FILE: &str = "features.csv";
pub const SELECTION_FILE: &str = "selection.csv";
pub const TRACE_FILE: &str = "optimization_trace.csv";
pub const REPORT_CSV_FILE: &str = "eval_report.csv";
pub const REPORT_JSON_FILE: &str = "eval_report.json";
pub const MODEL_FILE: &str = "model.nusvm";
pub const RUN_MANIFEST_FILE: &str = "run_manifest.txt";

/// Writes the artifacts of a finished model run under `out`.
pub fn write_model_run(out: &Path, ds: &Dataset, run: &ModelRun, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let stamp = cfg.stamp();
    let path = |name: &str| out.join(name);
    write_selection_report(&path(SELECTION_FILE), ds, &run.selection, Some(&stamp))?;
    run.search.write_trace(&path(TRACE_FILE), Some(&stamp))?;
    run.report
        .write(&path(REPORT_CSV_FILE), &path(REPORT_JSON_FILE), Some(&stamp))?;
    run.model.save(&path(MODEL_FILE))?;

    let mut manifest = stamp.comment_line();
    manifest.push_str(&cfg.canonical());
    let _ = writeln!(manifest, "best_spec = {}", run.best_spec);
    for (spec, reason) in &run.rejected {
        let _ = writeln!(manifest, "rejected_spec = {spec} ({reason})");
    }
    let model_digest = Sha256::digest(run.model.to_bytes());
    let _ = writeln!(
        manifest,
        "model_sha256 = {}",
        model_digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    );
    write_file(&path(RUN_MANIFEST_FILE), &manifest)?;
    Ok([
        SELECTION_FILE,
        TRACE_FILE,
        REPORT_CSV_FILE,
        REPORT_JSON_FILE,
        MODEL_FILE,
        RUN_MANIFEST_FILE,
    ]
    .iter()
    .map(|n| path(n))
    .collect())
}

/// Full pipeline: features, selection, search, evaluation, final model.
/// Every text artifact starts with the config hash and seed.
pub fn run_pipeline(records: &[PatientRecord], cfg: &RunConfig, out: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let labels: Vec<Label> = records.iter().map(|r| r.label).collect();
    stratified_kfold(&labels, cfg.cv_folds, 0).map_err(|e| e.in_stage("validate"))?;
    let ds = extract_features(records, cfg).map_err(|e| e.in_stage("features"))?;
    let features_path = out.join(FEATURES_FILE);
    ds.write_csv(&features_path, Some(&cfg.stamp()))?;
    let run = model_and_evaluate(&ds, cfg)?;
    let mut artifacts = vec![features_path];
    artifacts.extend(write_model_run(out, &ds, &run, cfg)?);
    Ok(RunSummary {
        dataset: ds,
        run,
        artifacts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_hash() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_text(&cfg.canonical()).unwrap(), cfg);
        assert_eq!(cfg.hash().len(), 64);
        let mut other = cfg;
        other.seed = 1;
        assert_ne!(other.hash(), cfg.hash());

        let parsed =
            RunConfig::from_text("# comment\nseed = 42\nwrangle.gap_threshold = 12.5s\ncv.repetitions=15\n").unwrap();
        assert_eq!(parsed.seed, 42);
        assert_eq!(parsed.wrangle.gap_threshold, GapThreshold::Seconds(12.5));
        assert_eq!(parsed.cv_repetitions, 15);
        assert!(matches!(RunConfig::from_text("nope = 1"), Err(Error::InvalidConfig(_))));
        assert!(matches!(RunConfig::from_text("seed = x"), Err(Error::InvalidConfig(_))));
        assert!(RunConfig::from_text("bo.iterations = 5").is_err());
    }

    #[test]
    fn default_run_constants() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.spectrogram.window_s, 100.0);
        assert_eq!(cfg.spectrogram.overlap_fraction, 0.75);
        assert_eq!(cfg.selection.threshold, 0.05);
        assert_eq!(cfg.selection.k, 18);
        assert_eq!((cfg.cv_repetitions, cfg.cv_folds), (150, 4));
        assert_eq!((cfg.bo_iterations, cfg.bo_init_random), (100, 10));
        assert_eq!((cfg.synth_success, cfg.synth_failure), (94, 60));
    }

    #[test]
    fn synthetic_cohort_is_deterministic_and_dirty() {
        let a = synth_cohort(2, 2, 7, 0.0).unwrap();
        let b = synth_cohort(2, 2, 7, 0.0).unwrap();
        assert_eq!(a.len(), 4);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.patient_id, y.patient_id);
            for kind in SignalKind::ALL {
                let (sx, sy) = (&x.series[&kind], &y.series[&kind]);
                assert_eq!(sx.times(), sy.times());
                let bits = |s: &NonUniformSeries| s.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
                assert_eq!(bits(sx), bits(sy));
            }
        }
        assert_eq!(a[0].label, Label::Success);
        assert_eq!(a[3].label, Label::Failure);
        let rr = &a[0].series[&SignalKind::Rr];
        assert!(rr.values().iter().any(|v| v.is_nan()));
        let max_gap = rr.times().windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        assert!(max_gap > 50.0);
        assert!(synth_cohort(0, 2, 7, 0.0).is_err());
        assert!(synth_cohort(2, 2, 7, 1.5).is_err());
    }

    #[test]
    fn synthetic_patient_yields_448_features() {
        let cohort = synth_cohort(1, 1, 3, 0.0).unwrap();
        let fv = patient_features(&cohort[0], &RunConfig::default()).unwrap();
        assert_eq!(fv.values.len(), 448);
        assert!(fv.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn cohort_round_trip() {
        let cohort = synth_cohort(2, 1, 5, 0.3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_cohort(dir.path(), &cohort, Some(&RunConfig::default().stamp())).unwrap();
        let back = ingest_cohort(&manifest).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in cohort.iter().zip(&back) {
            assert_eq!(a.patient_id, b.patient_id);
            assert_eq!(a.label, b.label);
            for kind in SignalKind::ALL {
                assert_eq!(a.series[&kind].times(), b.series[&kind].times());
                let eq = a.series[&kind]
                    .values()
                    .iter()
                    .zip(b.series[&kind].values())
                    .all(|(x, y)| x == y || (x.is_nan() && y.is_nan()));
                assert!(eq);
            }
        }
    }

    #[test]
    fn uniform_input_makes_all_psds_agree() {
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.5).collect();
        let values: Vec<f64> = times.iter().map(|t| 1.0 + (0.3 * t).sin() + (1.1 * t).cos()).collect();
        let s = NonUniformSeries::new(SignalKind::Vt, times, values).unwrap();
        let rate = mean_rate(&s).unwrap();
        let grid = comparison_grid(rate, 128).unwrap();
        let c = compare_interpolation(&s, rate, &grid).unwrap();
        for k in 0..grid.len() {
            let scale = c.nudft[k].abs().max(1.0);
            assert!((c.linear[k] - c.nudft[k]).abs() < 1e-9 * scale, "bin {k}");
            assert!((c.spline[k] - c.nudft[k]).abs() < 1e-9 * scale, "bin {k}");
        }
    }

    #[test]
    fn jittered_signal_shows_interpolation_artifacts() {
        let s = jittered_test_signal(1, 300, 1.0, 0.5, 0.08, 1.0, 0.3).unwrap();
        let rate = mean_rate(&s).unwrap();
        let c = compare_interpolation(&s, rate, &comparison_grid(rate, 256).unwrap()).unwrap();
        assert!(c.artifact_linear.unwrap() > 3.0, "{c:?}");
        assert!(c.artifact_spline.unwrap() > 3.0);
        assert!(c.attenuation_linear.unwrap() < 1.0);
        assert!(c.attenuation_spline.unwrap() < 1.0);
        assert!(c.nudft_prominence.unwrap() < 3.0, "{c:?}");
    }

    #[test]
    fn zero_signal_has_undefined_ratios() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.9 + 0.1 * ((i * 7) % 3) as f64).collect();
        let s = NonUniformSeries::new(SignalKind::Vt, times, vec![0.0; 50]).unwrap();
        let rate = mean_rate(&s).unwrap();
        let c = compare_interpolation(&s, rate, &comparison_grid(rate, 64).unwrap()).unwrap();
        assert!(c.nudft.iter().chain(&c.linear).chain(&c.spline).all(|&p| p == 0.0));
        assert_eq!(c.attenuation_linear, None);
        assert_eq!(c.artifact_spline, None);
        assert_eq!(c.nudft_prominence, None);
        assert!(c.diagnostics_csv(None).contains("artifact_linear,undefined"));
    }

    #[test]
    fn too_few_patients_names_the_stage() {
        let cohort = synth_cohort(2, 1, 1, 0.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let err = run_pipeline(&cohort, &RunConfig::default(), dir.path()).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "validate", .. }), "{err}");
        assert!(matches!(err.root(), Error::ClassTooSmall { .. }));
        assert!(err.to_string().contains("validate"));
    }
}

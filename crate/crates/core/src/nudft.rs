//! Non-uniform discrete Fourier transform evaluated by direct summation,
//! Hamming-windowed spectrograms over irregular samples, and the
//! interpolate-then-transform baselines used for comparison.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::io::Stamp;
use crate::series::NonUniformSeries;

/// Uniformly spaced positive frequencies `k * step` for `k = 1..=len`; DC is never included.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    step: f64,
    frequencies: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(step: f64, len: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() || len == 0 {
            return Err(Error::InvalidConfig(format!(
                "frequency grid needs step > 0 and at least one bin (step {step}, len {len})"
            )));
        }
        let frequencies = (1..=len).map(|k| k as f64 * step).collect();
        Ok(Self { step, frequencies })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.frequencies[0]
    }

    pub fn max(&self) -> f64 {
        self.frequencies[self.frequencies.len() - 1]
    }

    /// Index of the bin closest to `f`.
    pub fn nearest_bin(&self, f: f64) -> usize {
        let k = (f / self.step).round() as isize - 1;
        k.clamp(0, self.len() as isize - 1) as usize
    }
}

/// Complex amplitudes on a grid together with the PSD `|F|^2 / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid: FrequencyGrid,
    pub complex_values: Vec<Complex64>,
    pub psd: Vec<f64>,
    /// Number of samples that entered the summation.
    pub sample_count: usize,
}

impl Spectrum {
    pub fn from_complex(grid: FrequencyGrid, complex_values: Vec<Complex64>, sample_count: usize) -> Self {
        let n = sample_count as f64;
        let psd = complex_values.iter().map(|c| c.norm_sqr() / n).collect();
        Self {
            grid,
            complex_values,
            psd,
            sample_count,
        }
    }

    /// Spectrum with the given PSD and no phase information. Used when only
    /// the power distribution matters.
    pub fn from_psd(grid: FrequencyGrid, psd: Vec<f64>) -> Self {
        assert_eq!(grid.len(), psd.len());
        let complex_values = psd.iter().map(|p| Complex64::new(p.sqrt(), 0.0)).collect();
        Self {
            grid,
            complex_values,
            psd,
            sample_count: 1,
        }
    }

    pub fn frequencies(&self) -> &[f64] {
        self.grid.frequencies()
    }
}

/// `F(v) = sum_n w_n f(x_n) exp(-i 2 pi v x_n)` at arbitrary frequencies, one
/// `sin_cos` per term.
pub fn nudft_at(times: &[f64], values: &[f64], weights: Option<&[f64]>, frequencies: &[f64]) -> Vec<Complex64> {
    frequencies
        .iter()
        .map(|&v| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (n, (&x, &f)) in times.iter().zip(values).enumerate() {
                let a = f * weights.map_or(1.0, |w| w[n]);
                let (s, c) = (-2.0 * PI * v * x).sin_cos();
                acc += Complex64::new(a * c, a * s);
            }
            acc
        })
        .collect()
}

// Phasor recurrence drift is bounded by re-evaluating sin/cos every this many bins.
const RESYNC_BINS: usize = 32;

/// NUDFT of a series on a uniform grid. Optional weights multiply the samples.
pub fn nudft(series: &NonUniformSeries, grid: &FrequencyGrid, weights: Option<&[f64]>) -> Result<Spectrum> {
    nudft_samples(series.times(), series.values(), grid, weights)
}

pub(crate) fn nudft_samples(
    times: &[f64],
    values: &[f64],
    grid: &FrequencyGrid,
    weights: Option<&[f64]>,
) -> Result<Spectrum> {
    if times.is_empty() {
        return Err(Error::TooFewSamples { len: 0, min: 1 });
    }
    if let Some(w) = weights {
        if w.len() != times.len() {
            return Err(Error::LengthMismatch {
                times: times.len(),
                values: w.len(),
            });
        }
    }
    let m = grid.len();
    let step = grid.step();
    let mut acc = vec![Complex64::new(0.0, 0.0); m];
    for (n, (&x, &f)) in times.iter().zip(values).enumerate() {
        let a = f * weights.map_or(1.0, |w| w[n]);
        if a == 0.0 {
            continue;
        }
        let (s, c) = (-2.0 * PI * step * x).sin_cos();
        let rot = Complex64::new(c, s);
        let mut phasor = Complex64::new(0.0, 0.0);
        for (k, slot) in acc.iter_mut().enumerate() {
            if k % RESYNC_BINS == 0 {
                let (s, c) = (-2.0 * PI * grid.frequencies[k] * x).sin_cos();
                phasor = Complex64::new(c, s);
            } else {
                phasor *= rot;
            }
            *slot += phasor * a;
        }
    }
    Ok(Spectrum::from_complex(grid.clone(), acc, times.len()))
}

/// Hamming weights `0.54 - 0.46 cos(2 pi (t - start) / window)` at the sample times.
pub fn hamming_weights(times: &[f64], frame_start: f64, window_s: f64) -> Result<Vec<f64>> {
    let end = frame_start + window_s;
    let slack = 1e-9 * window_s.abs().max(1.0);
    times
        .iter()
        .map(|&t| {
            if t < frame_start - slack || t > end + slack {
                Err(Error::OutOfWindow {
                    time: t,
                    start: frame_start,
                    end,
                })
            } else {
                Ok(0.54 - 0.46 * (2.0 * PI * (t - frame_start) / window_s).cos())
            }
        })
        .collect()
}

/// Grid of `bins` frequencies up to `1 / (2 * median interval)` of the window's samples.
pub fn make_grid(window: &NonUniformSeries, bins: usize) -> Result<FrequencyGrid> {
    grid_for_times(window.times(), bins)
}

fn grid_for_times(times: &[f64], bins: usize) -> Result<FrequencyGrid> {
    if times.len() < 2 {
        return Err(Error::TooFewSamples {
            len: times.len(),
            min: 2,
        });
    }
    let diffs: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let median = crate::stats::median(&diffs);
    if !(median > 0.0) {
        return Err(Error::DegenerateWindow);
    }
    let f_max = 1.0 / (2.0 * median);
    FrequencyGrid::new(f_max / bins as f64, bins)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrogramConfig {
    pub window_s: f64,
    pub overlap_fraction: f64,
    pub bins: usize,
    pub min_samples_per_frame: usize,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        Self {
            window_s: 100.0,
            overlap_fraction: 0.75,
            bins: 128,
            min_samples_per_frame: 8,
        }
    }
}

impl SpectrogramConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_s > 0.0)
            || !(0.0..1.0).contains(&self.overlap_fraction)
            || self.bins < 2
            || self.min_samples_per_frame < 2
        {
            return Err(Error::InvalidConfig(format!("invalid spectrogram config {self:?}")));
        }
        Ok(())
    }

    pub fn hop(&self) -> f64 {
        self.window_s * (1.0 - self.overlap_fraction)
    }

    /// Frame count before sparse frames are dropped.
    pub fn frame_count(&self, span: f64) -> usize {
        if span + 1e-9 < self.window_s {
            return 0;
        }
        ((span - self.window_s) / self.hop() + 1e-9).floor() as usize + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramFrame {
    pub start: f64,
    pub duration: f64,
    pub sample_count: usize,
    pub spectrum: Spectrum,
}

/// Sliding Hamming-windowed NUDFT. Frames with too few samples are skipped.
pub fn spectrogram(series: &NonUniformSeries, cfg: &SpectrogramConfig) -> Result<Vec<SpectrogramFrame>> {
    cfg.validate()?;
    let span = series.duration();
    let count = cfg.frame_count(span);
    if count == 0 {
        return Err(Error::SeriesTooShort {
            span,
            window: cfg.window_s,
        });
    }
    let times = series.times();
    let values = series.values();
    let t0 = series.start();
    let slack = 1e-9 * cfg.window_s;
    let mut frames = Vec::with_capacity(count);
    for j in 0..count {
        let start = t0 + j as f64 * cfg.hop();
        let end = start + cfg.window_s;
        let lo = times.partition_point(|&t| t < start - slack);
        let hi = times.partition_point(|&t| t <= end + slack);
        if hi - lo < cfg.min_samples_per_frame {
            continue;
        }
        let frame_times = &times[lo..hi];
        let weights = hamming_weights(frame_times, start, cfg.window_s)?;
        let grid = grid_for_times(frame_times, cfg.bins)?;
        let spectrum = nudft_samples(frame_times, &values[lo..hi], &grid, Some(&weights))?;
        frames.push(SpectrogramFrame {
            start,
            duration: cfg.window_s,
            sample_count: hi - lo,
            spectrum,
        });
    }
    Ok(frames)
}

pub fn write_spectrogram_csv(path: &Path, frames: &[SpectrogramFrame], stamp: Option<&Stamp>) -> Result<()> {
    let mut out = String::new();
    if let Some(stamp) = stamp {
        out.push_str(&stamp.comment_line());
    }
    out.push_str("frame_start_s,frequency_hz,psd\n");
    for frame in frames {
        for (f, p) in frame.spectrum.frequencies().iter().zip(&frame.spectrum.psd) {
            out.push_str(&format!("{},{f},{p}\n", frame.start));
        }
    }
    crate::io::write_file(path, &out)
}

/// Uniformly sampled signal: `values[i]` at `start + i / rate_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSeries {
    pub start: f64,
    pub rate_hz: f64,
    pub values: Vec<f64>,
}

impl UniformSeries {
    /// Checks that `times` are evenly spaced (relative tolerance 1e-9).
    pub fn from_samples(times: &[f64], values: &[f64]) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch {
                times: times.len(),
                values: values.len(),
            });
        }
        if times.len() < 2 {
            return Err(Error::TooFewSamples {
                len: times.len(),
                min: 2,
            });
        }
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        if !(dt > 0.0) {
            return Err(Error::NonUniformInput);
        }
        for (i, &t) in times.iter().enumerate() {
            let expected = times[0] + i as f64 * dt;
            if (t - expected).abs() > 1e-9 * dt.max(1.0) * (i as f64).max(1.0) {
                return Err(Error::NonUniformInput);
            }
        }
        Ok(Self {
            start: times[0],
            rate_hz: 1.0 / dt,
            values: values.to_vec(),
        })
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len())
            .map(|i| self.start + i as f64 / self.rate_hz)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Linear,
    CubicSpline,
}

/// Resamples onto `t0, t0 + 1/rate, ...` up to the last sample time.
pub fn resample_uniform(series: &NonUniformSeries, rate_hz: f64, method: Interpolation) -> Result<UniformSeries> {
    let min = match method {
        Interpolation::Linear => 2,
        Interpolation::CubicSpline => 4,
    };
    if series.len() < min {
        return Err(Error::TooFewSamples { len: series.len(), min });
    }
    if !(rate_hz > 0.0) {
        return Err(Error::InvalidConfig("resampling rate must be positive".into()));
    }
    let t0 = series.start();
    let count = (series.duration() * rate_hz + 1e-9).floor() as usize + 1;
    let query: Vec<f64> = (0..count).map(|i| t0 + i as f64 / rate_hz).collect();
    let values = match method {
        Interpolation::Linear => interp_linear(series.times(), series.values(), &query),
        Interpolation::CubicSpline => NaturalSpline::fit(series.times(), series.values()).eval_many(&query),
    };
    Ok(UniformSeries {
        start: t0,
        rate_hz,
        values,
    })
}

fn interp_linear(xs: &[f64], ys: &[f64], query: &[f64]) -> Vec<f64> {
    query
        .iter()
        .map(|&q| {
            let i = xs.partition_point(|&x| x <= q).clamp(1, xs.len() - 1);
            let (x0, x1) = (xs[i - 1], xs[i]);
            let u = ((q - x0) / (x1 - x0)).clamp(0.0, 1.0);
            ys[i - 1] + (ys[i] - ys[i - 1]) * u
        })
        .collect()
}

/// Natural cubic spline (zero second derivative at both ends).
#[derive(Debug, Clone)]
pub struct NaturalSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    second: Vec<f64>,
}

impl NaturalSpline {
    pub fn fit(xs: &[f64], ys: &[f64]) -> Self {
        let n = xs.len();
        let mut second = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior second derivatives.
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut upper = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for i in 0..m {
                let h0 = xs[i + 1] - xs[i];
                let h1 = xs[i + 2] - xs[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h1 - (ys[i + 1] - ys[i]) / h0);
            }
            for i in 1..m {
                let lower = xs[i + 1] - xs[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            second[m] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                second[i + 1] = (rhs[i] - upper[i] * second[i + 2]) / diag[i];
            }
        }
        Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            second,
        }
    }

    pub fn eval(&self, q: f64) -> f64 {
        let xs = &self.xs;
        let i = xs.partition_point(|&x| x <= q).clamp(1, xs.len() - 1);
        let (x0, x1) = (xs[i - 1], xs[i]);
        let h = x1 - x0;
        let a = (x1 - q) / h;
        let b = (q - x0) / h;
        a * self.ys[i - 1]
            + b * self.ys[i]
            + ((a * a * a - a) * self.second[i - 1] + (b * b * b - b) * self.second[i]) * h * h / 6.0
    }

    pub fn eval_many(&self, query: &[f64]) -> Vec<f64> {
        query.iter().map(|&q| self.eval(q)).collect()
    }
}

/// The same direct summation applied to an already uniform signal.
pub fn uniform_periodogram(series: &UniformSeries, grid: &FrequencyGrid) -> Result<Spectrum> {
    let times = series.times();
    // Re-validate so hand-built UniformSeries values cannot smuggle in bad spacing.
    if !(series.rate_hz > 0.0) || !series.rate_hz.is_finite() {
        return Err(Error::NonUniformInput);
    }
    nudft_samples(&times, &series.values, grid, None)
}

//! Per-frame spectral features, the seven statistical descriptors taken over
//! each feature's time course, and assembly of the 448-entry patient vector.
//!
//! Canonical layout is signal-major: for each [`SignalKind`] in
//! [`SignalKind::ALL`] order, each [`SpectralFeature`] in
//! [`SpectralFeature::ALL`] order, each [`Descriptor`] in
//! [`Descriptor::ALL`] order. Names read `Stat[Feat(Signal)]`, e.g.
//! `Iq[SC(f/V_T)]`.

use std::collections::BTreeMap;

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::nudft::Spectrum;
use crate::series::SignalKind;
use crate::stats;

/// Relative floor applied to PSD bins before taking logarithms.
pub const PSD_FLOOR: f64 = 1e-12;

/// Number of bands used by spectral contrast.
pub const CONTRAST_BANDS: usize = 6;

pub const FEATURE_COUNT: usize = 8 * 8 * 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpectralFeature {
    InstantaneousFrequency,
    MeanFrequency,
    MedianFrequency,
    Entropy,
    Energy,
    Contrast,
    Flatness,
    Crest,
}

impl SpectralFeature {
    pub const ALL: [SpectralFeature; 8] = [
        SpectralFeature::InstantaneousFrequency,
        SpectralFeature::MeanFrequency,
        SpectralFeature::MedianFrequency,
        SpectralFeature::Entropy,
        SpectralFeature::Energy,
        SpectralFeature::Contrast,
        SpectralFeature::Flatness,
        SpectralFeature::Crest,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            SpectralFeature::InstantaneousFrequency => "IF",
            SpectralFeature::MeanFrequency => "MNF",
            SpectralFeature::MedianFrequency => "MDF",
            SpectralFeature::Entropy => "SE",
            SpectralFeature::Energy => "SEn",
            SpectralFeature::Contrast => "SC",
            SpectralFeature::Flatness => "SF",
            SpectralFeature::Crest => "SCF",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Descriptor {
    Mean,
    Std,
    Iqr,
    Skewness,
    Kurtosis,
    Median,
    Rms,
}

impl Descriptor {
    pub const ALL: [Descriptor; 7] = [
        Descriptor::Mean,
        Descriptor::Std,
        Descriptor::Iqr,
        Descriptor::Skewness,
        Descriptor::Kurtosis,
        Descriptor::Median,
        Descriptor::Rms,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Descriptor::Mean => "M",
            Descriptor::Std => "Std",
            Descriptor::Iqr => "Iq",
            Descriptor::Skewness => "S",
            Descriptor::Kurtosis => "K",
            Descriptor::Median => "Me",
            Descriptor::Rms => "RMS",
        }
    }
}

pub fn feature_name(signal: SignalKind, feature: SpectralFeature, descriptor: Descriptor) -> String {
    format!(
        "{}[{}({})]",
        descriptor.short_name(),
        feature.short_name(),
        signal.short_name()
    )
}

/// All 448 names in canonical order.
pub fn feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(FEATURE_COUNT);
    for signal in SignalKind::ALL {
        for feature in SpectralFeature::ALL {
            for descriptor in Descriptor::ALL {
                names.push(feature_name(signal, feature, descriptor));
            }
        }
    }
    names
}

fn total_power(spectrum: &Spectrum) -> Result<f64> {
    let total: f64 = spectrum.psd.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroSpectrum);
    }
    Ok(total)
}

/// Frequency of the largest PSD bin; ties go to the lower frequency.
pub fn instantaneous_frequency(spectrum: &Spectrum) -> Result<f64> {
    total_power(spectrum)?;
    let mut best = 0;
    for (k, &p) in spectrum.psd.iter().enumerate() {
        if p > spectrum.psd[best] {
            best = k;
        }
    }
    Ok(spectrum.frequencies()[best])
}

/// PSD-weighted mean frequency.
pub fn mean_frequency(spectrum: &Spectrum) -> Result<f64> {
    let total = total_power(spectrum)?;
    let weighted: f64 = spectrum
        .frequencies()
        .iter()
        .zip(&spectrum.psd)
        .map(|(f, p)| f * p)
        .sum();
    Ok(weighted / total)
}

/// Half-power frequency.
///
/// Each bin's power is centered on its frequency, so the cumulative power at
/// bin `k` is `sum(P[..k]) + P[k] / 2`. The result interpolates linearly
/// between the two bins whose centered cumulative power brackets half the total.
pub fn median_frequency(spectrum: &Spectrum) -> Result<f64> {
    let total = total_power(spectrum)?;
    let half = total / 2.0;
    let freqs = spectrum.frequencies();
    let mut before = 0.0;
    let mut prev_center = 0.0;
    for (k, &p) in spectrum.psd.iter().enumerate() {
        let center = before + p / 2.0;
        if center >= half {
            if k == 0 || center == prev_center {
                return Ok(freqs[k]);
            }
            let frac = (half - prev_center) / (center - prev_center);
            return Ok(freqs[k - 1] + frac * (freqs[k] - freqs[k - 1]));
        }
        before += p;
        prev_center = center;
    }
    Ok(freqs[freqs.len() - 1])
}

/// Shannon entropy of the normalized PSD divided by `ln(M)`, in [0, 1].
pub fn spectral_entropy(spectrum: &Spectrum) -> Result<f64> {
    let total = total_power(spectrum)?;
    let m = spectrum.psd.len();
    if m < 2 {
        return Ok(0.0);
    }
    let h: f64 = spectrum
        .psd
        .iter()
        .map(|&p| p / total)
        .filter(|&q| q > 0.0)
        .map(|q| -q * q.ln())
        .sum();
    Ok((h / (m as f64).ln()).clamp(0.0, 1.0))
}

/// Sum of squared magnitudes of the complex spectrum.
pub fn spectral_energy(spectrum: &Spectrum) -> f64 {
    spectrum.complex_values.iter().map(|c| c.norm_sqr()).sum()
}

/// Mean over `bands` contiguous bin ranges of `max(P) - min(P)` within each.
pub fn spectral_contrast(spectrum: &Spectrum, bands: usize) -> Result<f64> {
    let m = spectrum.psd.len();
    if bands == 0 || m < bands {
        return Err(Error::TooFewBins { bins: m, bands });
    }
    let mut sum = 0.0;
    let mut used = 0;
    for b in 0..bands {
        let band = &spectrum.psd[b * m / bands..(b + 1) * m / bands];
        if band.is_empty() {
            continue;
        }
        let max = band.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = band.iter().copied().fold(f64::INFINITY, f64::min);
        sum += max - min;
        used += 1;
    }
    Ok(sum / used as f64)
}

fn floored(psd: &[f64]) -> Vec<f64> {
    let max = psd.iter().copied().fold(0.0, f64::max);
    let floor = PSD_FLOOR * max;
    psd.iter().map(|&p| p.max(floor)).collect()
}

/// Geometric mean over arithmetic mean of the (floored) PSD.
pub fn spectral_flatness(spectrum: &Spectrum) -> Result<f64> {
    total_power(spectrum)?;
    let p = floored(&spectrum.psd);
    let n = p.len() as f64;
    let log_mean = p.iter().map(|v| v.ln()).sum::<f64>() / n;
    let am = p.iter().sum::<f64>() / n;
    Ok((log_mean.exp() / am).clamp(0.0, 1.0))
}

/// Peak PSD over the RMS of the PSD; at least 1.
pub fn spectral_crest(spectrum: &Spectrum) -> Result<f64> {
    total_power(spectrum)?;
    let p = &spectrum.psd;
    let max = p.iter().copied().fold(0.0, f64::max);
    let rms = (p.iter().map(|v| v * v).sum::<f64>() / p.len() as f64).sqrt();
    Ok((max / rms).max(1.0))
}

/// The eight spectral features of one spectrogram frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameFeatures {
    pub if_hz: f64,
    pub mnf_hz: f64,
    pub mdf_hz: f64,
    pub se: f64,
    pub sen: f64,
    pub sc: f64,
    pub sf: f64,
    pub scf: f64,
}

impl FrameFeatures {
    pub fn compute(spectrum: &Spectrum) -> Result<Self> {
        Ok(Self {
            if_hz: instantaneous_frequency(spectrum)?,
            mnf_hz: mean_frequency(spectrum)?,
            mdf_hz: median_frequency(spectrum)?,
            se: spectral_entropy(spectrum)?,
            sen: spectral_energy(spectrum),
            sc: spectral_contrast(spectrum, CONTRAST_BANDS)?,
            sf: spectral_flatness(spectrum)?,
            scf: spectral_crest(spectrum)?,
        })
    }

    pub fn get(&self, feature: SpectralFeature) -> f64 {
        match feature {
            SpectralFeature::InstantaneousFrequency => self.if_hz,
            SpectralFeature::MeanFrequency => self.mnf_hz,
            SpectralFeature::MedianFrequency => self.mdf_hz,
            SpectralFeature::Entropy => self.se,
            SpectralFeature::Energy => self.sen,
            SpectralFeature::Contrast => self.sc,
            SpectralFeature::Flatness => self.sf,
            SpectralFeature::Crest => self.scf,
        }
    }
}

/// Mean, Std, Iq, S, K, Me, RMS of a trajectory, in [`Descriptor::ALL`] order.
///
/// Moments are population moments; kurtosis is non-excess (3 for a normal
/// distribution). Skewness and kurtosis are reported as 0 when the trajectory
/// is constant.
pub fn descriptor_vector(trajectory: &[f64]) -> Result<[f64; 7]> {
    let n = trajectory.len();
    if n < 2 {
        return Err(Error::TooFewFrames { len: n, min: 2 });
    }
    let nf = n as f64;
    let mean = stats::mean(trajectory);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in trajectory {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let (skew, kurt) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    } else {
        (0.0, 0.0)
    };
    let sorted = stats::sorted(trajectory);
    let iqr = stats::quantile_sorted(&sorted, 0.75) - stats::quantile_sorted(&sorted, 0.25);
    let median = stats::quantile_sorted(&sorted, 0.5);
    let rms = (trajectory.iter().map(|x| x * x).sum::<f64>() / nf).sqrt();
    Ok([mean, m2.sqrt(), iqr, skew, kurt, median, rms])
}

/// One patient's named feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub patient_id: String,
    pub label: Label,
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// Builds the 448-entry vector from per-signal frame-feature trajectories.
pub fn assemble_features(
    trajectories: &BTreeMap<SignalKind, Vec<FrameFeatures>>,
    patient_id: &str,
    label: Label,
) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(FEATURE_COUNT);
    for signal in SignalKind::ALL {
        let frames = trajectories
            .get(&signal)
            .ok_or_else(|| Error::MissingSignal(signal.short_name().to_string()))?;
        if frames.len() < 2 {
            return Err(Error::TooFewFrames {
                len: frames.len(),
                min: 2,
            });
        }
        for feature in SpectralFeature::ALL {
            let course: Vec<f64> = frames.iter().map(|f| f.get(feature)).collect();
            values.extend(descriptor_vector(&course)?);
        }
    }
    Ok(FeatureVector {
        patient_id: patient_id.to_string(),
        label,
        names: feature_names(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nudft::FrequencyGrid;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn psd_on(step: f64, psd: &[f64]) -> Spectrum {
        Spectrum::from_psd(FrequencyGrid::new(step, psd.len()).unwrap(), psd.to_vec())
    }

    #[test]
    fn instantaneous_frequency_examples() {
        assert_eq!(instantaneous_frequency(&psd_on(1.0, &[0.0, 5.0, 0.0])).unwrap(), 2.0);
        assert_eq!(instantaneous_frequency(&psd_on(1.0, &[5.0, 5.0])).unwrap(), 1.0);
        assert!(matches!(
            instantaneous_frequency(&psd_on(1.0, &[0.0, 0.0])),
            Err(Error::ZeroSpectrum)
        ));
    }

    #[test]
    fn noisy_sinusoid_peak() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let mut t = 0.0;
        let mut times = Vec::new();
        while t < 100.0 {
            times.push(t);
            t += rng.random_range(1.4..2.6);
        }
        let f0 = 0.12;
        let values: Vec<f64> = times
            .iter()
            .map(|&t| (2.0 * std::f64::consts::PI * f0 * t).sin() + rng.random_range(-0.2..0.2))
            .collect();
        let s = crate::series::NonUniformSeries::new(SignalKind::Vt, times, values).unwrap();
        let grid = crate::nudft::make_grid(&s, 128).unwrap();
        let spec = crate::nudft::nudft(&s, &grid, None).unwrap();
        let got = instantaneous_frequency(&spec).unwrap();
        assert!((got - f0).abs() <= grid.step(), "{got} vs {f0}");
    }

    #[test]
    fn mean_frequency_examples() {
        assert_eq!(mean_frequency(&psd_on(1.0, &[1.0, 1.0, 1.0])).unwrap(), 2.0);
        assert_eq!(mean_frequency(&psd_on(0.5, &[2.0, 0.0])).unwrap(), 0.5);
        assert_eq!(mean_frequency(&psd_on(1.0, &[1.0, 3.0])).unwrap(), 1.75);
    }

    /// Centered-cumulative median written as a plain search over interpolated
    /// points, independent of the single-pass implementation.
    fn median_oracle(freqs: &[f64], psd: &[f64]) -> f64 {
        let total: f64 = psd.iter().sum();
        let centers: Vec<f64> = (0..psd.len())
            .map(|k| psd[..k].iter().sum::<f64>() + psd[k] / 2.0)
            .collect();
        let half = total / 2.0;
        let k = centers.iter().position(|&c| c >= half).unwrap();
        if k == 0 || centers[k] == centers[k - 1] {
            return freqs[k];
        }
        freqs[k - 1] + (half - centers[k - 1]) / (centers[k] - centers[k - 1]) * (freqs[k] - freqs[k - 1])
    }

    #[test]
    fn median_frequency_examples() {
        assert_eq!(median_frequency(&psd_on(1.0, &[0.0, 0.0, 4.0, 0.0])).unwrap(), 3.0);

        let flat = psd_on(1.0, &[1.0; 4]);
        let oracle = median_oracle(flat.frequencies(), &flat.psd);
        assert_eq!(oracle, 2.5);
        assert_eq!(median_frequency(&flat).unwrap(), oracle);

        let skewed = psd_on(1.0, &[3.0, 1.0]);
        let oracle = median_oracle(skewed.frequencies(), &skewed.psd);
        assert_eq!(oracle, 1.25);
        assert_eq!(median_frequency(&skewed).unwrap(), oracle);
    }

    #[test]
    fn entropy_examples() {
        assert!((spectral_entropy(&psd_on(1.0, &[2.0; 16])).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(spectral_entropy(&psd_on(1.0, &[0.0, 3.0, 0.0])).unwrap(), 0.0);
        assert!((spectral_entropy(&psd_on(1.0, &[0.5, 0.5])).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn energy_examples() {
        let grid = FrequencyGrid::new(1.0, 2).unwrap();
        let zero = Spectrum::from_complex(grid.clone(), vec![Complex64::new(0.0, 0.0); 2], 2);
        assert_eq!(spectral_energy(&zero), 0.0);
        let s = Spectrum::from_complex(grid, vec![Complex64::new(3.0, 0.0), Complex64::new(0.0, 4.0)], 2);
        assert_eq!(spectral_energy(&s), 25.0);

        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let values: Vec<Complex64> = (0..64)
            .map(|_| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
            .collect();
        let mut oracle = 0.0;
        for c in &values {
            oracle += c.re * c.re + c.im * c.im;
        }
        let s = Spectrum::from_complex(FrequencyGrid::new(0.1, 64).unwrap(), values, 10);
        assert!((spectral_energy(&s) - oracle).abs() < 1e-12 * oracle);
    }

    #[test]
    fn contrast_examples() {
        assert_eq!(spectral_contrast(&psd_on(1.0, &[2.0; 12]), 6).unwrap(), 0.0);

        let mut psd = vec![7.0; 12];
        psd[0] = 5.0;
        psd[1] = 1.0;
        assert!((spectral_contrast(&psd_on(1.0, &psd), 6).unwrap() - 4.0 / 6.0).abs() < 1e-15);

        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let psd: Vec<f64> = (0..128).map(|_| rng.random_range(0.0..10.0)).collect();
        let mut oracle = 0.0;
        for b in 0..6 {
            let (lo, hi) = (b * 128 / 6, (b + 1) * 128 / 6);
            let mut mx = f64::MIN;
            let mut mn = f64::MAX;
            for &v in &psd[lo..hi] {
                mx = mx.max(v);
                mn = mn.min(v);
            }
            oracle += mx - mn;
        }
        oracle /= 6.0;
        assert!((spectral_contrast(&psd_on(1.0, &psd), 6).unwrap() - oracle).abs() < 1e-12);

        assert!(matches!(
            spectral_contrast(&psd_on(1.0, &[1.0; 4]), 6),
            Err(Error::TooFewBins { .. })
        ));
    }

    #[test]
    fn flatness_examples() {
        assert!((spectral_flatness(&psd_on(1.0, &[3.0; 8])).unwrap() - 1.0).abs() < 1e-12);
        assert!((spectral_flatness(&psd_on(1.0, &[4.0, 1.0])).unwrap() - 0.8).abs() < 1e-12);

        let mut spike = vec![0.0; 128];
        spike[17] = 2.0;
        let floor: f64 = 1e-12 * 2.0;
        let log_mean = (2.0f64.ln() + 127.0 * floor.ln()) / 128.0;
        let oracle = log_mean.exp() / ((2.0 + 127.0 * floor) / 128.0);
        let got = spectral_flatness(&psd_on(1.0, &spike)).unwrap();
        assert!((got - oracle).abs() < 1e-20);
        assert!(got < 1e-3);
    }

    #[test]
    fn crest_examples() {
        assert!((spectral_crest(&psd_on(1.0, &[2.0; 8])).unwrap() - 1.0).abs() < 1e-12);
        assert!((spectral_crest(&psd_on(1.0, &[3.0, 4.0])).unwrap() - 4.0 / 12.5f64.sqrt()).abs() < 1e-12);
        let mut spike = vec![0.0; 128];
        spike[3] = 5.0;
        assert!((spectral_crest(&psd_on(1.0, &spike)).unwrap() - 128f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn descriptor_examples() {
        let d = descriptor_vector(&[3.0, 4.0]).unwrap();
        assert_eq!(d[0], 3.5);
        assert!((d[6] - 12.5f64.sqrt()).abs() < 1e-15);

        let d = descriptor_vector(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(d[3], 0.0);

        let d = descriptor_vector(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(d[2], 1.5);
        assert_eq!(d[5], 2.5);

        // Normal-like symmetric sample: kurtosis of {-1, 1} is exactly 1.
        let d = descriptor_vector(&[-1.0, 1.0, -1.0, 1.0]).unwrap();
        assert_eq!(d[4], 1.0);

        let d = descriptor_vector(&[2.0; 5]).unwrap();
        assert_eq!(d, [2.0, 0.0, 0.0, 0.0, 0.0, 2.0, 2.0]);

        assert!(matches!(descriptor_vector(&[1.0]), Err(Error::TooFewFrames { .. })));
    }

    fn sample_frames(offset: f64) -> Vec<FrameFeatures> {
        (0..5)
            .map(|i| {
                let x = i as f64 + offset;
                FrameFeatures {
                    if_hz: 0.1 + 0.01 * x,
                    mnf_hz: 0.2,
                    mdf_hz: 0.15 + 0.001 * x * x,
                    se: 0.5,
                    sen: 10.0 + x,
                    sc: 2.0,
                    sf: 0.3,
                    scf: 3.0 - 0.1 * x,
                }
            })
            .collect()
    }

    #[test]
    fn assembles_448_named_features() {
        let mut traj = BTreeMap::new();
        for (i, k) in SignalKind::ALL.into_iter().enumerate() {
            traj.insert(k, sample_frames(i as f64));
        }
        let fv = assemble_features(&traj, "p1", Label::Success).unwrap();
        assert_eq!(fv.values.len(), 448);
        assert_eq!(fv.names.len(), 448);
        assert_eq!(fv.names[0], "M[IF(RR)]");
        assert_eq!(fv.names[447], "RMS[SCF(f/V_T)]");
        assert!(fv.get("RMS[SEn(f/V_T)]").is_some());
        assert!(fv.get("Iq[SC(f/V_T)]").is_some());

        let again = assemble_features(&traj, "p2", Label::Success).unwrap();
        assert_eq!(fv.values, again.values);

        traj.remove(&SignalKind::Rr);
        assert!(matches!(
            assemble_features(&traj, "p1", Label::Success),
            Err(Error::MissingSignal(_))
        ));
        traj.insert(SignalKind::Rr, sample_frames(0.0)[..1].to_vec());
        assert!(matches!(
            assemble_features(&traj, "p1", Label::Success),
            Err(Error::TooFewFrames { .. })
        ));
    }

    #[test]
    fn name_set_is_the_cross_product() {
        let names = feature_names();
        let unique: std::collections::BTreeSet<_> = names.iter().collect();
        assert_eq!(unique.len(), 448);
        for s in SignalKind::ALL {
            for f in SpectralFeature::ALL {
                for d in Descriptor::ALL {
                    assert!(unique.contains(&feature_name(s, f, d)));
                }
            }
        }
    }

    fn arb_psd() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..100.0], 6..64)
            .prop_filter("non-zero", |v| v.iter().sum::<f64>() > 1e-6)
    }

    proptest! {
        #[test]
        fn feature_ranges(psd in arb_psd(), step in 0.001f64..1.0) {
            let s = psd_on(step, &psd);
            let f = FrameFeatures::compute(&s).unwrap();
            let (lo, hi) = (s.grid.min(), s.grid.max());
            prop_assert!((0.0..=1.0).contains(&f.sf));
            prop_assert!((0.0..=1.0).contains(&f.se));
            prop_assert!(f.scf >= 1.0);
            prop_assert!(f.sc >= 0.0);
            prop_assert!(f.mnf_hz >= lo - 1e-12 && f.mnf_hz <= hi + 1e-12);
            prop_assert!(f.mdf_hz >= lo - 1e-12 && f.mdf_hz <= hi + 1e-12);
            prop_assert!(s.frequencies().contains(&f.if_hz));
        }

        #[test]
        fn scale_invariance(psd in arb_psd()) {
            let base = FrameFeatures::compute(&psd_on(0.01, &psd)).unwrap();
            for c in [1e-3, 1e3] {
                let scaled: Vec<f64> = psd.iter().map(|p| p * c).collect();
                let s = FrameFeatures::compute(&psd_on(0.01, &scaled)).unwrap();
                prop_assert_eq!(s.if_hz, base.if_hz);
                for (a, b) in [(s.mnf_hz, base.mnf_hz), (s.mdf_hz, base.mdf_hz), (s.se, base.se), (s.sf, base.sf), (s.scf, base.scf)] {
                    prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
                }
                prop_assert!((s.sc / c - base.sc).abs() <= 1e-9 * base.sc.max(1e-12));
                prop_assert!((s.sen / c - base.sen).abs() <= 1e-9 * base.sen.max(1e-12));
            }
        }

        #[test]
        fn constant_trajectory(v in -100.0f64..100.0, n in 2usize..20) {
            let d = descriptor_vector(&vec![v; n]).unwrap();
            prop_assert!(d[1].abs() <= 1e-12 * v.abs().max(1.0));
            prop_assert_eq!(d[2], 0.0);
            prop_assert_eq!(d[5], v);
            prop_assert!((d[0] - v).abs() <= 1e-12 * v.abs().max(1.0));
            prop_assert!((d[6] - v.abs()).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }
}

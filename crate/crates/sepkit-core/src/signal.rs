//! Time-domain signal containers, power measurement, and SNR-controlled
//! mixture synthesis.
//!
//! A mixture is modeled as the sum of its sources plus an optional noise
//! term; `make_mixture` rescales every source after the first so the pair
//! hits a requested SNR, then returns both the mixture and the rescaled
//! sources as ground truth.

use alloc::format;
use alloc::vec::Vec;

// Needed for float math in no_std builds; test builds pull std into the
// crate graph and its inherent f64 methods shadow the trait.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::CoreError;

/// A mono signal: dimensionless amplitudes at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl Waveform {
    /// Builds a waveform, rejecting empty sample buffers, zero sample
    /// rates, and non-finite amplitudes.
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self, CoreError> {
        if samples.is_empty() {
            return Err(CoreError::EmptyInput(format!("waveform has no samples")));
        }
        if sample_rate_hz == 0 {
            return Err(CoreError::InvalidParameter(format!("sample rate must be positive")));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(CoreError::InvalidParameter(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// An ordered list of sources sharing one length and sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSet {
    sources: Vec<Waveform>,
}

impl SourceSet {
    pub fn new(sources: Vec<Waveform>) -> Result<Self, CoreError> {
        let first = sources
            .first()
            .ok_or_else(|| CoreError::EmptyInput(format!("source set needs at least one source")))?;
        let (len, rate) = (first.len(), first.sample_rate_hz);
        for (j, s) in sources.iter().enumerate() {
            if s.len() != len {
                return Err(CoreError::ShapeMismatch(format!(
                    "source {j} has {} samples, source 0 has {len}",
                    s.len()
                )));
            }
            if s.sample_rate_hz != rate {
                return Err(CoreError::ShapeMismatch(format!(
                    "source {j} sampled at {} Hz, source 0 at {rate} Hz",
                    s.sample_rate_hz
                )));
            }
        }
        Ok(Self { sources })
    }

    /// Number of sources J.
    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    /// Samples per source.
    pub fn n_samples(&self) -> usize {
        self.sources[0].len()
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sources[0].sample_rate_hz
    }

    pub fn sources(&self) -> &[Waveform] {
        &self.sources
    }

    pub fn into_sources(self) -> Vec<Waveform> {
        self.sources
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Waveform> {
        self.sources.iter()
    }
}

impl core::ops::Index<usize> for SourceSet {
    type Output = Waveform;

    fn index(&self, j: usize) -> &Waveform {
        &self.sources[j]
    }
}

/// Mean power of a signal in dB: `10 * log10(mean(x^2))`.
pub fn power_db(w: &Waveform) -> Result<f64, CoreError> {
    if w.is_empty() {
        return Err(CoreError::EmptyInput(format!("waveform has no samples")));
    }
    let mean_sq = w.samples.iter().map(|s| s * s).sum::<f64>() / w.len() as f64;
    if mean_sq == 0.0 {
        return Err(CoreError::InvalidParameter(format!("zero-power signal")));
    }
    Ok(10.0 * mean_sq.log10())
}

/// Mixes a source set at requested SNRs relative to source 0, plus an
/// optional noise term.
///
/// `snr_db[j - 1]` fixes `power_db(source 0) - power_db(scaled source j)`
/// for every source after the first; `noise_snr_db` does the same for the
/// noise term. Noise longer than the sources is cropped from the start.
/// Returns the mixture (the exact element-wise sum of everything scaled)
/// and the rescaled sources as ground truth.
pub fn make_mixture(
    sources: &SourceSet,
    snr_db: &[f64],
    noise: Option<&Waveform>,
    noise_snr_db: Option<f64>,
) -> Result<(Waveform, SourceSet), CoreError> {
    let j_total = sources.n_sources();
    if snr_db.len() != j_total - 1 {
        return Err(CoreError::ShapeMismatch(format!(
            "got {} SNR values for {} sources, expected {}",
            snr_db.len(),
            j_total,
            j_total - 1
        )));
    }
    let n = sources.n_samples();
    let rate = sources.sample_rate_hz();
    let p_ref = power_db(&sources[0])?;

    let mut rescaled = Vec::with_capacity(j_total);
    rescaled.push(sources[0].clone());
    for j in 1..j_total {
        let p_j = power_db(&sources[j])?;
        let alpha = 10.0_f64.powf((p_ref - p_j - snr_db[j - 1]) / 20.0);
        let samples: Vec<f64> = sources[j].samples.iter().map(|s| alpha * s).collect();
        rescaled.push(Waveform { samples, sample_rate_hz: rate });
    }

    let scaled_noise = match (noise, noise_snr_db) {
        (None, None) => None,
        (None, Some(_)) => {
            return Err(CoreError::InvalidParameter(format!(
                "noise SNR given without a noise signal"
            )));
        }
        (Some(_), None) => {
            return Err(CoreError::InvalidParameter(format!(
                "noise signal given without a noise SNR"
            )));
        }
        (Some(nz), Some(target)) => {
            if nz.len() < n {
                return Err(CoreError::ShapeMismatch(format!(
                    "noise has {} samples, sources have {n}",
                    nz.len()
                )));
            }
            let cropped = Waveform {
                samples: nz.samples[..n].to_vec(),
                sample_rate_hz: rate,
            };
            let p_nz = power_db(&cropped)?;
            let alpha = 10.0_f64.powf((p_ref - p_nz - target) / 20.0);
            let samples: Vec<f64> = cropped.samples.iter().map(|s| alpha * s).collect();
            Some(samples)
        }
    };

    let mut mix = alloc::vec![0.0; n];
    for s in &rescaled {
        for (m, v) in mix.iter_mut().zip(s.samples.iter()) {
            *m += v;
        }
    }
    if let Some(nz) = &scaled_noise {
        for (m, v) in mix.iter_mut().zip(nz.iter()) {
            *m += v;
        }
    }

    let mixture = Waveform::new(mix, rate)?;
    Ok((mixture, SourceSet::new(rescaled)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn constant(value: f64, n: usize) -> Waveform {
        Waveform::new(vec![value; n], 8000).unwrap()
    }

    #[test]
    fn power_of_unit_constant_is_zero_db() {
        assert!(power_db(&constant(1.0, 100)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn power_of_half_constant_is_minus_six_db() {
        let p = power_db(&constant(0.5, 64)).unwrap();
        assert!((p - (-6.020599913279624)).abs() < 1e-9, "got {p}");
    }

    #[test]
    fn power_of_silence_is_an_error() {
        let err = power_db(&constant(0.0, 16)).unwrap_err();
        assert!(matches!(err, CoreError::InvalidParameter(_)));
    }

    #[test]
    fn power_scales_by_twenty_log_alpha() {
        let w = Waveform::new(vec![0.1, -0.4, 0.25, 0.9, -0.3], 8000).unwrap();
        let alpha = 3.7;
        let scaled = Waveform::new(w.samples.iter().map(|s| alpha * s).collect(), 8000).unwrap();
        let diff = power_db(&scaled).unwrap() - power_db(&w).unwrap();
        assert!((diff - 20.0 * alpha.log10()).abs() < 1e-9);
    }

    #[test]
    fn zero_snr_between_equal_power_sources_changes_nothing() {
        let s1 = Waveform::new(vec![0.5, -0.5, 0.5, -0.5], 8000).unwrap();
        let s2 = Waveform::new(vec![-0.5, 0.5, -0.5, 0.5], 8000).unwrap();
        let set = SourceSet::new(vec![s1.clone(), s2.clone()]).unwrap();
        let (mix, rescaled) = make_mixture(&set, &[0.0], None, None).unwrap();
        for t in 0..4 {
            assert!((rescaled[1].samples[t] - s2.samples[t]).abs() < 1e-12);
            assert!((mix.samples[t] - (s1.samples[t] + s2.samples[t])).abs() < 1e-12);
        }
    }

    #[test]
    fn six_db_snr_gives_power_ratio_four() {
        let s1 = Waveform::new(vec![0.3, -0.8, 0.1, 0.6], 8000).unwrap();
        let s2 = Waveform::new(vec![0.9, 0.2, -0.5, -0.1], 8000).unwrap();
        let set = SourceSet::new(vec![s1, s2]).unwrap();
        let (_, rescaled) = make_mixture(&set, &[6.020599913279624], None, None).unwrap();
        let p1 = power_db(&rescaled[0]).unwrap();
        let p2 = power_db(&rescaled[1]).unwrap();
        let ratio = 10.0_f64.powf((p1 - p2) / 10.0);
        assert!((ratio - 4.0).abs() < 1e-9, "ratio {ratio}");
    }

    #[test]
    fn mixture_is_the_exact_sum_of_rescaled_sources() {
        // Three deterministic pseudo-random sources at SNRs -5 and 5 dB.
        let mut state: u64 = 99;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let mk = |next: &mut dyn FnMut() -> f64| {
            Waveform::new((0..128).map(|_| next()).collect(), 8000).unwrap()
        };
        let set = SourceSet::new(vec![mk(&mut next), mk(&mut next), mk(&mut next)]).unwrap();
        let (mix, rescaled) = make_mixture(&set, &[-5.0, 5.0], None, None).unwrap();
        for t in 0..set.n_samples() {
            let sum: f64 = rescaled.iter().map(|s| s.samples[t]).sum();
            assert_eq!(mix.samples[t], sum);
        }
    }

    #[test]
    fn noise_is_cropped_and_hits_its_snr() {
        let s1 = Waveform::new(vec![0.4, -0.4, 0.4, -0.4], 8000).unwrap();
        let set = SourceSet::new(vec![s1]).unwrap();
        let noise = Waveform::new(vec![0.1, -0.2, 0.3, -0.1, 0.7, 0.9], 8000).unwrap();
        let (mix, rescaled) = make_mixture(&set, &[], Some(&noise), Some(10.0)).unwrap();
        assert_eq!(mix.len(), 4);
        // Noise contribution = mixture - source 0; its power must sit 10 dB
        // below the reference.
        let residual = Waveform::new(
            (0..4).map(|t| mix.samples[t] - rescaled[0].samples[t]).collect(),
            8000,
        )
        .unwrap();
        let gap = power_db(&rescaled[0]).unwrap() - power_db(&residual).unwrap();
        assert!((gap - 10.0).abs() < 1e-9, "gap {gap}");
    }

    #[test]
    fn noise_without_snr_is_rejected() {
        let set = SourceSet::new(vec![constant(0.5, 8)]).unwrap();
        let noise = constant(0.1, 8);
        assert!(make_mixture(&set, &[], Some(&noise), None).is_err());
    }

    #[test]
    fn mismatched_snr_list_is_rejected() {
        let set = SourceSet::new(vec![constant(0.5, 8), constant(0.25, 8)]).unwrap();
        assert!(matches!(
            make_mixture(&set, &[0.0, 0.0], None, None),
            Err(CoreError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn source_sets_reject_mismatched_lengths() {
        let err = SourceSet::new(vec![constant(0.5, 8), constant(0.5, 9)]).unwrap_err();
        assert!(matches!(err, CoreError::ShapeMismatch(_)));
    }
}

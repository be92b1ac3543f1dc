//! Iterative phase recovery from magnitude spectra: Griffin-Lim (classic
//! and momentum-accelerated) and multi-input spectrogram inversion, which
//! recovers several sources jointly under the constraint that they sum to
//! the mixture.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

// Needed for float math in no_std builds; test builds pull std into the
// crate graph and its inherent f64 methods shadow the trait.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::CoreError;
use crate::filterbank::{Complex64, Filterbank, FilterbankKind};
use crate::signal::{SourceSet, Waveform};
use crate::transform::{decode, encode, TfMatrix, TimeFrequencyRep};

/// Initial phase grid for the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitPhase {
    Zero,
    Random(u64),
    /// Phase of the mixture's encoding; only meaningful for the
    /// multi-source inversion, which has a mixture to take it from.
    Mixture,
}

/// Settings shared by both phase recovery algorithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseReconConfig {
    pub n_iters: usize,
    /// 0 gives the classic alternating projection; positive values add the
    /// accelerated extrapolation `rep' + momentum * (rep' - rep'_prev)`.
    /// Ignored by the multi-source inversion.
    pub momentum: f64,
    pub init_phase: InitPhase,
}

impl Default for PhaseReconConfig {
    fn default() -> Self {
        Self { n_iters: 32, momentum: 0.99, init_phase: InitPhase::Zero }
    }
}

impl PhaseReconConfig {
    /// Defaults for the multi-source inversion: phases start from the
    /// mixture's encoding.
    pub fn for_misi() -> Self {
        Self { n_iters: 32, momentum: 0.0, init_phase: InitPhase::Mixture }
    }

    fn validate(&self) -> Result<(), CoreError> {
        if self.n_iters == 0 {
            return Err(CoreError::InvalidParameter(format!("n_iters must be at least 1")));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(CoreError::InvalidParameter(format!(
                "momentum {} must lie in [0, 1)",
                self.momentum
            )));
        }
        Ok(())
    }
}

/// Joint estimates and the per-iteration mixture residual.
#[derive(Debug, Clone)]
pub struct MisiResult {
    pub estimates: SourceSet,
    /// Max absolute `mixture - sum(estimates)` after each iteration's
    /// redistribution step.
    pub residual_trace: Vec<f64>,
}

fn arg_or_zero(c: Complex64) -> f64 {
    if c.re == 0.0 && c.im == 0.0 {
        0.0
    } else {
        c.im.atan2(c.re)
    }
}

fn check_stft(fb: &Filterbank) -> Result<(), CoreError> {
    if fb.kind() != FilterbankKind::Stft {
        return Err(CoreError::InvalidParameter(format!(
            "phase recovery needs the exact-reconstruction stft bank, got kind {}",
            fb.kind().name()
        )));
    }
    Ok(())
}

fn check_magnitudes(mag: &TfMatrix, fb: &Filterbank) -> Result<(), CoreError> {
    if mag.n_channels() != fb.n_channels() {
        return Err(CoreError::ShapeMismatch(format!(
            "magnitude grid has {} channels, bank has {}",
            mag.n_channels(),
            fb.n_channels()
        )));
    }
    if let Some(i) = mag.values().iter().position(|&v| v < 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "magnitude has a negative entry at flat index {i}"
        )));
    }
    Ok(())
}

/// Signal length implied by a frame grid under the encoder's padding
/// convention (`kernel_size - stride` zeros on both ends).
fn implied_length(n_frames: usize, kernel: usize, stride: usize) -> Result<usize, CoreError> {
    let total = (n_frames + 1) * stride;
    if total <= kernel {
        return Err(CoreError::InvalidParameter(format!(
            "{n_frames} frames at stride {stride} do not cover one {kernel}-tap kernel"
        )));
    }
    Ok(total - kernel)
}

fn init_phases(init: InitPhase, cells: usize) -> Vec<f64> {
    match init {
        InitPhase::Zero => vec![0.0; cells],
        InitPhase::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..cells)
                .map(|_| rng.random_range(-core::f64::consts::PI..core::f64::consts::PI))
                .collect()
        }
        InitPhase::Mixture => unreachable!("rejected before phase initialization"),
    }
}

fn rep_from(template: &TimeFrequencyRep, mag: &TfMatrix, phase: &[f64]) -> TimeFrequencyRep {
    let frames = mag
        .values()
        .iter()
        .zip(phase.iter())
        .map(|(&m, &p)| Complex64::new(m * p.cos(), m * p.sin()))
        .collect();
    template.with_frames(frames).expect("template and magnitude grids agree by construction")
}

/// Recovers a waveform whose encoding magnitude approximates `target_mag`
/// by alternating decode/encode projections.
///
/// Returns the final signal and the per-iteration relative magnitude
/// error `||  |encode(decode(rep))| - target ||_2 / || target ||_2`.
pub fn griffin_lim(
    target_mag: &TfMatrix,
    fb: &Filterbank,
    sample_rate_hz: u32,
    cfg: &PhaseReconConfig,
) -> Result<(Waveform, Vec<f64>), CoreError> {
    cfg.validate()?;
    if cfg.init_phase == InitPhase::Mixture {
        return Err(CoreError::InvalidParameter(format!(
            "mixture phase initialization needs a mixture; use the multi-source inversion"
        )));
    }
    check_stft(fb)?;
    check_magnitudes(target_mag, fb)?;
    let n_samples = implied_length(target_mag.n_frames(), fb.kernel_size(), fb.stride())?;
    let template = TimeFrequencyRep {
        frames: vec![Complex64::new(0.0, 0.0); target_mag.values().len()],
        n_channels: target_mag.n_channels(),
        n_frames: target_mag.n_frames(),
        stride: fb.stride(),
        kernel_size: fb.kernel_size(),
        sample_rate_hz,
        n_samples,
        paired: true,
    };
    let target_norm = target_mag.norm();
    if target_norm == 0.0 {
        let zeros = Waveform::new(vec![0.0; n_samples], sample_rate_hz)?;
        return Ok((zeros, vec![0.0; cfg.n_iters]));
    }
    let synthesis = fb.synthesis()?;
    let mut phase = init_phases(cfg.init_phase, target_mag.values().len());
    let mut trace = Vec::with_capacity(cfg.n_iters);
    let mut prev: Option<Vec<Complex64>> = None;
    for _ in 0..cfg.n_iters {
        let rep = rep_from(&template, target_mag, &phase);
        let x = decode(&synthesis, &rep)?;
        let reproj = encode(fb, &x)?;
        let err = reproj
            .frames()
            .iter()
            .zip(target_mag.values())
            .map(|(c, &m)| {
                let d = c.norm() - m;
                d * d
            })
            .sum::<f64>()
            .sqrt()
            / target_norm;
        trace.push(err);
        match &mut prev {
            Some(last) => {
                for (i, p) in phase.iter_mut().enumerate() {
                    let current = reproj.frames()[i];
                    let candidate = current + (current - last[i]) * cfg.momentum;
                    *p = arg_or_zero(candidate);
                    last[i] = current;
                }
            }
            None => {
                for (i, p) in phase.iter_mut().enumerate() {
                    *p = arg_or_zero(reproj.frames()[i]);
                }
                prev = Some(reproj.frames().to_vec());
            }
        }
    }
    let final_rep = rep_from(&template, target_mag, &phase);
    Ok((decode(&synthesis, &final_rep)?, trace))
}

/// Jointly recovers J sources from their target magnitudes under the
/// constraint that the estimates sum to the mixture.
///
/// Each iteration decodes every source from its magnitude and current
/// phase, redistributes the mixture residual equally, and re-estimates
/// phases from the corrected signals. The redistribution runs last, so
/// the returned estimates sum to the mixture to within rounding error.
pub fn misi(
    mixture: &Waveform,
    target_mags: &[TfMatrix],
    fb: &Filterbank,
    cfg: &PhaseReconConfig,
) -> Result<MisiResult, CoreError> {
    cfg.validate()?;
    check_stft(fb)?;
    let j_total = target_mags.len();
    if j_total < 2 {
        return Err(CoreError::InvalidParameter(format!(
            "joint inversion needs at least 2 sources, got {j_total}"
        )));
    }
    let mix_rep = encode(fb, mixture)?;
    for (j, mag) in target_mags.iter().enumerate() {
        check_magnitudes(mag, fb)?;
        if mag.n_frames() != mix_rep.n_frames() {
            return Err(CoreError::ShapeMismatch(format!(
                "source {j} magnitude has {} frames, the mixture encodes to {}",
                mag.n_frames(),
                mix_rep.n_frames()
            )));
        }
    }
    let synthesis = fb.synthesis()?;
    let cells = mix_rep.frames().len();
    let mut phases: Vec<Vec<f64>> = match cfg.init_phase {
        InitPhase::Mixture => {
            let p: Vec<f64> = mix_rep.frames().iter().map(|&c| arg_or_zero(c)).collect();
            vec![p; j_total]
        }
        InitPhase::Zero => vec![vec![0.0; cells]; j_total],
        InitPhase::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..j_total)
                .map(|_| {
                    (0..cells)
                        .map(|_| {
                            rng.random_range(-core::f64::consts::PI..core::f64::consts::PI)
                        })
                        .collect()
                })
                .collect()
        }
    };
    let t_len = mixture.len();
    let mut estimates: Vec<Vec<f64>> = vec![vec![0.0; t_len]; j_total];
    let mut trace = Vec::with_capacity(cfg.n_iters);
    for iter in 0..cfg.n_iters {
        for j in 0..j_total {
            let rep = rep_from(&mix_rep, &target_mags[j], &phases[j]);
            estimates[j] = decode(&synthesis, &rep)?.samples;
        }
        for t in 0..t_len {
            let total: f64 = estimates.iter().map(|e| e[t]).sum();
            let correction = (mixture.samples[t] - total) / j_total as f64;
            for e in estimates.iter_mut() {
                e[t] += correction;
            }
        }
        let mut residual = 0.0f64;
        for t in 0..t_len {
            let total: f64 = estimates.iter().map(|e| e[t]).sum();
            residual = residual.max((mixture.samples[t] - total).abs());
        }
        trace.push(residual);
        if iter + 1 < cfg.n_iters {
            for j in 0..j_total {
                let w = Waveform::new(estimates[j].clone(), mixture.sample_rate_hz)?;
                let rep = encode(fb, &w)?;
                for (p, &c) in phases[j].iter_mut().zip(rep.frames()) {
                    *p = arg_or_zero(c);
                }
            }
        }
    }
    let sources = estimates
        .into_iter()
        .map(|samples| Waveform::new(samples, mixture.sample_rate_hz))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MisiResult { estimates: SourceSet::new(sources)?, residual_trace: trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::Window;
    use crate::transform::polar;

    fn noise(n: usize, seed: u64) -> Waveform {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15) | 1;
        let samples = (0..n)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
            })
            .collect();
        Waveform::new(samples, 8000).unwrap()
    }

    fn classic(n_iters: usize) -> PhaseReconConfig {
        PhaseReconConfig { n_iters, momentum: 0.0, init_phase: InitPhase::Zero }
    }

    #[test]
    fn zero_magnitude_gives_silence_and_zero_trace() {
        let fb = Filterbank::stft(32, 16, Window::SqrtHann).unwrap();
        let mag = TfMatrix::zeros(fb.n_channels(), 10);
        let (w, trace) = griffin_lim(&mag, &fb, 8000, &classic(5)).unwrap();
        assert!(w.samples.iter().all(|&v| v == 0.0));
        assert_eq!(trace, alloc::vec![0.0; 5]);
        assert_eq!(w.len(), 11 * 16 - 32);
    }

    #[test]
    fn classic_trace_is_non_increasing_on_consistent_magnitudes() {
        let fb = Filterbank::stft(64, 32, Window::SqrtHann).unwrap();
        let x = noise(960, 1);
        let (mag, _) = polar(&encode(&fb, &x).unwrap());
        let (_, trace) = griffin_lim(&mag, &fb, 8000, &classic(30)).unwrap();
        for pair in trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-10, "trace rose: {} -> {}", pair[0], pair[1]);
        }
        assert!(trace.last().unwrap() < &(0.5 * trace[0]), "no convergence: {trace:?}");
    }

    #[test]
    fn single_iteration_is_one_projection_pair() {
        let fb = Filterbank::stft(32, 16, Window::SqrtHann).unwrap();
        let synth = fb.synthesis().unwrap();
        let x = noise(480, 2);
        let target = encode(&fb, &x).unwrap();
        let (mag, _) = polar(&target);
        let (got, _) = griffin_lim(&mag, &fb, 8000, &classic(1)).unwrap();
        // Manual unroll: zero-phase spectrum -> decode -> encode -> keep
        // phases -> decode.
        let zero_phase = target
            .with_frames(mag.values().iter().map(|&m| Complex64::new(m, 0.0)).collect())
            .unwrap();
        let x0 = decode(&synth, &zero_phase).unwrap();
        let reproj = encode(&fb, &x0).unwrap();
        let (_, phase) = polar(&reproj);
        let replaced = target
            .with_frames(
                mag.values()
                    .iter()
                    .zip(phase.values())
                    .map(|(&m, &p)| Complex64::new(m * p.cos(), m * p.sin()))
                    .collect(),
            )
            .unwrap();
        let want = decode(&synth, &replaced).unwrap();
        for (a, b) in got.samples.iter().zip(&want.samples) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn momentum_runs_are_deterministic() {
        let fb = Filterbank::stft(32, 16, Window::SqrtHann).unwrap();
        let (mag, _) = polar(&encode(&fb, &noise(480, 3)).unwrap());
        let cfg = PhaseReconConfig { n_iters: 8, momentum: 0.9, init_phase: InitPhase::Random(11) };
        let (a, ta) = griffin_lim(&mag, &fb, 8000, &cfg).unwrap();
        let (b, tb) = griffin_lim(&mag, &fb, 8000, &cfg).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(ta, tb);
        let other = PhaseReconConfig { init_phase: InitPhase::Random(12), ..cfg };
        let (c, _) = griffin_lim(&mag, &fb, 8000, &other).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let fb = Filterbank::stft(32, 16, Window::SqrtHann).unwrap();
        let mag = TfMatrix::zeros(fb.n_channels(), 4);
        let bad_iters = PhaseReconConfig { n_iters: 0, ..classic(1) };
        assert!(griffin_lim(&mag, &fb, 8000, &bad_iters).is_err());
        let bad_momentum = PhaseReconConfig { momentum: 1.0, ..classic(1) };
        assert!(griffin_lim(&mag, &fb, 8000, &bad_momentum).is_err());
        let free = Filterbank::free(8, 16, 8, 0).unwrap();
        let free_mag = TfMatrix::zeros(8, 4);
        assert!(griffin_lim(&free_mag, &free, 8000, &classic(1)).is_err());
        assert!(griffin_lim(&mag, &fb, 8000, &PhaseReconConfig {
            init_phase: InitPhase::Mixture,
            ..classic(1)
        })
        .is_err());
    }

    #[test]
    fn negative_magnitudes_are_rejected() {
        let fb = Filterbank::stft(32, 16, Window::SqrtHann).unwrap();
        let mut mag = TfMatrix::zeros(fb.n_channels(), 4);
        mag.values_mut()[3] = -1.0;
        assert!(matches!(
            griffin_lim(&mag, &fb, 8000, &classic(1)),
            Err(CoreError::InvalidParameter(_))
        ));
    }

    #[test]
    fn misi_estimates_sum_to_the_mixture_every_iteration() {
        let fb = Filterbank::stft(64, 32, Window::SqrtHann).unwrap();
        let a = noise(800, 4);
        let b = noise(800, 5);
        let mixture = Waveform::new(
            a.samples.iter().zip(&b.samples).map(|(x, y)| x + y).collect(),
            8000,
        )
        .unwrap();
        let mags: Vec<TfMatrix> = [&a, &b]
            .iter()
            .map(|s| polar(&encode(&fb, s).unwrap()).0)
            .collect();
        let cfg = PhaseReconConfig { n_iters: 12, ..PhaseReconConfig::for_misi() };
        let out = misi(&mixture, &mags, &fb, &cfg).unwrap();
        assert_eq!(out.residual_trace.len(), 12);
        for (i, r) in out.residual_trace.iter().enumerate() {
            assert!(r < &1e-6, "iteration {i}: residual {r}");
        }
        for t in 0..mixture.len() {
            let total: f64 = out.estimates.iter().map(|e| e.samples[t]).sum();
            assert!((total - mixture.samples[t]).abs() < 1e-6);
        }
    }

    #[test]
    fn misi_with_silent_second_source_returns_the_mixture() {
        let fb = Filterbank::stft(64, 32, Window::SqrtHann).unwrap();
        let x = noise(800, 6);
        let mags = alloc::vec![
            polar(&encode(&fb, &x).unwrap()).0,
            TfMatrix::zeros(fb.n_channels(), encode(&fb, &x).unwrap().n_frames()),
        ];
        let out = misi(&x, &mags, &fb, &PhaseReconConfig::for_misi()).unwrap();
        let energy: f64 = x.samples.iter().map(|v| v * v).sum();
        let err: f64 = out.estimates[0]
            .samples
            .iter()
            .zip(&x.samples)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        // The silent source only ever holds its share of the residual.
        assert!(err / energy < 1e-3, "relative error {}", err / energy);
        let leak: f64 = out.estimates[1].samples.iter().map(|v| v * v).sum();
        assert!(leak / energy < 1e-3);
    }

    #[test]
    fn misi_needs_two_sources_and_an_stft_bank() {
        let fb = Filterbank::stft(64, 32, Window::SqrtHann).unwrap();
        let x = noise(800, 7);
        let mag = polar(&encode(&fb, &x).unwrap()).0;
        assert!(misi(&x, core::slice::from_ref(&mag), &fb, &PhaseReconConfig::for_misi()).is_err());
        let free = Filterbank::free(8, 16, 8, 0).unwrap();
        assert!(misi(&x, &[mag.clone(), mag], &free, &PhaseReconConfig::for_misi()).is_err());
    }
}

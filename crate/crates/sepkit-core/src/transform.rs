//! Strided-convolution encoding to a complex time-frequency grid, the
//! transposed-convolution decoder, and entrywise mask application.
//!
//! `encode` zero-pads the signal by `kernel_size - stride` on both ends so
//! every original sample is covered by a full complement of frames, then
//! slides the analysis filters with the bank's stride. `decode` overlap-adds
//! the synthesis filters, divides by the squared-window envelope when the
//! bank carries a window, and trims the padding back off.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

// Needed for float math in no_std builds; test builds pull std into the
// crate graph and its inherent f64 methods shadow the trait.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::CoreError;
use crate::filterbank::{Complex64, Filterbank};
use crate::signal::Waveform;

/// A real matrix shaped like a time-frequency representation
/// (channels x frames, row-major). Used for magnitudes, phases, and
/// magnitude masks.
#[derive(Debug, Clone, PartialEq)]
pub struct TfMatrix {
    values: Vec<f64>,
    n_channels: usize,
    n_frames: usize,
}

impl TfMatrix {
    pub fn new(values: Vec<f64>, n_channels: usize, n_frames: usize) -> Result<Self, CoreError> {
        if values.len() != n_channels * n_frames {
            return Err(CoreError::ShapeMismatch(format!(
                "{} values cannot fill a {n_channels} x {n_frames} grid",
                values.len()
            )));
        }
        Ok(Self { values, n_channels, n_frames })
    }

    pub fn zeros(n_channels: usize, n_frames: usize) -> Self {
        Self { values: vec![0.0; n_channels * n_frames], n_channels, n_frames }
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, channel: usize, frame: usize) -> f64 {
        self.values[channel * self.n_frames + frame]
    }

    /// Entrywise L2 norm.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Complex output of `encode`: channels x frames plus the metadata needed
/// to decode back to the original length.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFrequencyRep {
    pub(crate) frames: Vec<Complex64>,
    pub(crate) n_channels: usize,
    pub(crate) n_frames: usize,
    pub(crate) stride: usize,
    pub(crate) kernel_size: usize,
    pub(crate) sample_rate_hz: u32,
    /// Original signal length; `decode` trims its output to this.
    pub(crate) n_samples: usize,
    pub(crate) paired: bool,
}

impl TimeFrequencyRep {
    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn at(&self, channel: usize, frame: usize) -> Complex64 {
        self.frames[channel * self.n_frames + frame]
    }

    pub fn frames(&self) -> &[Complex64] {
        &self.frames
    }

    /// Same grid and metadata, new complex values.
    pub fn with_frames(&self, frames: Vec<Complex64>) -> Result<Self, CoreError> {
        if frames.len() != self.frames.len() {
            return Err(CoreError::ShapeMismatch(format!(
                "got {} values for a {} x {} representation",
                frames.len(),
                self.n_channels,
                self.n_frames
            )));
        }
        Ok(Self { frames, ..self.clone() })
    }

    fn shape_matches(&self, n_channels: usize, n_frames: usize) -> bool {
        self.n_channels == n_channels && self.n_frames == n_frames
    }
}

/// Splits a representation into entrywise magnitude and phase. Zero
/// entries get phase 0; phases lie in (-pi, pi].
pub fn polar(rep: &TimeFrequencyRep) -> (TfMatrix, TfMatrix) {
    let mut mag = Vec::with_capacity(rep.frames.len());
    let mut phase = Vec::with_capacity(rep.frames.len());
    for v in &rep.frames {
        mag.push(v.norm());
        let p = if v.re == 0.0 && v.im == 0.0 {
            0.0
        } else {
            let p = v.im.atan2(v.re);
            if p == -core::f64::consts::PI {
                core::f64::consts::PI
            } else {
                p
            }
        };
        phase.push(p);
    }
    (
        TfMatrix { values: mag, n_channels: rep.n_channels, n_frames: rep.n_frames },
        TfMatrix { values: phase, n_channels: rep.n_channels, n_frames: rep.n_frames },
    )
}

/// Rebuilds a representation from magnitude and phase on the grid of
/// `template` (which supplies stride, kernel, rate, and length metadata).
pub fn from_polar(
    template: &TimeFrequencyRep,
    magnitude: &TfMatrix,
    phase: &TfMatrix,
) -> Result<TimeFrequencyRep, CoreError> {
    if !template.shape_matches(magnitude.n_channels, magnitude.n_frames)
        || !template.shape_matches(phase.n_channels, phase.n_frames)
    {
        return Err(CoreError::ShapeMismatch(format!(
            "magnitude/phase grids do not match the {} x {} template",
            template.n_channels, template.n_frames
        )));
    }
    let frames = magnitude
        .values
        .iter()
        .zip(phase.values.iter())
        .map(|(&m, &p)| Complex64::new(m * p.cos(), m * p.sin()))
        .collect();
    template.with_frames(frames)
}

/// Entrywise mask: non-negative real gains or complex multipliers.
#[derive(Debug, Clone, PartialEq)]
pub enum Mask {
    Magnitude(TfMatrix),
    Complex { values: Vec<Complex64>, n_channels: usize, n_frames: usize },
}

impl Mask {
    pub fn complex(
        values: Vec<Complex64>,
        n_channels: usize,
        n_frames: usize,
    ) -> Result<Self, CoreError> {
        if values.len() != n_channels * n_frames {
            return Err(CoreError::ShapeMismatch(format!(
                "{} values cannot fill a {n_channels} x {n_frames} grid",
                values.len()
            )));
        }
        Ok(Self::Complex { values, n_channels, n_frames })
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Self::Magnitude(m) => (m.n_channels, m.n_frames),
            Self::Complex { n_channels, n_frames, .. } => (*n_channels, *n_frames),
        }
    }
}

/// Multiplies a representation entrywise by a mask. Magnitude masks scale
/// the modulus and preserve phase; complex masks multiply outright.
pub fn apply_mask(rep: &TimeFrequencyRep, mask: &Mask) -> Result<TimeFrequencyRep, CoreError> {
    let (ch, fr) = mask.shape();
    if !rep.shape_matches(ch, fr) {
        return Err(CoreError::ShapeMismatch(format!(
            "mask is {ch} x {fr}, representation is {} x {}",
            rep.n_channels, rep.n_frames
        )));
    }
    let frames = match mask {
        Mask::Magnitude(m) => {
            if let Some(i) = m.values.iter().position(|&v| v < 0.0) {
                return Err(CoreError::InvalidParameter(format!(
                    "magnitude mask has a negative entry at flat index {i}"
                )));
            }
            rep.frames.iter().zip(m.values.iter()).map(|(v, &g)| v * g).collect()
        }
        Mask::Complex { values, .. } => {
            rep.frames.iter().zip(values.iter()).map(|(v, g)| v * g).collect()
        }
    };
    rep.with_frames(frames)
}

/// Encodes a waveform by strided convolution with the analysis filters.
///
/// Frame f of complex channel k is
/// `sum_t padded[f * stride + t] * (filters[2k][t] + i filters[2k+1][t])`;
/// unpaired banks fill only the real part, one channel per filter.
pub fn encode(fb: &Filterbank, w: &Waveform) -> Result<TimeFrequencyRep, CoreError> {
    if w.is_empty() {
        return Err(CoreError::EmptyInput(format!("cannot encode an empty signal")));
    }
    let (k, s) = (fb.kernel_size(), fb.stride());
    let t_len = w.len();
    let pad = k - s;
    if t_len + 2 * pad < k {
        return Err(CoreError::InvalidParameter(format!(
            "signal of {t_len} samples is shorter than one {k}-tap frame even after padding"
        )));
    }
    // Extra right padding so the frame grid covers the tail exactly.
    let usable = t_len + 2 * pad - k;
    let extra = (s - usable % s) % s;
    let padded_len = t_len + 2 * pad + extra;
    let mut padded = vec![0.0; padded_len];
    padded[pad..pad + t_len].copy_from_slice(&w.samples);

    let n_frames = (padded_len - k) / s + 1;
    let n_channels = fb.n_channels();
    let mut frames = vec![Complex64::new(0.0, 0.0); n_channels * n_frames];
    if fb.is_paired() {
        for c in 0..n_channels {
            let row_re = fb.filter(2 * c);
            let row_im = fb.filter(2 * c + 1);
            for f in 0..n_frames {
                let seg = &padded[f * s..f * s + k];
                let mut re = 0.0;
                let mut im = 0.0;
                for t in 0..k {
                    re += seg[t] * row_re[t];
                    im += seg[t] * row_im[t];
                }
                frames[c * n_frames + f] = Complex64::new(re, im);
            }
        }
    } else {
        for c in 0..n_channels {
            let row = fb.filter(c);
            for f in 0..n_frames {
                let seg = &padded[f * s..f * s + k];
                let mut re = 0.0;
                for t in 0..k {
                    re += seg[t] * row[t];
                }
                frames[c * n_frames + f] = Complex64::new(re, 0.0);
            }
        }
    }
    Ok(TimeFrequencyRep {
        frames,
        n_channels,
        n_frames,
        stride: s,
        kernel_size: k,
        sample_rate_hz: w.sample_rate_hz,
        n_samples: t_len,
        paired: fb.is_paired(),
    })
}

fn check_decode_shapes(fb: &Filterbank, rep: &TimeFrequencyRep) -> Result<(), CoreError> {
    if fb.is_paired() != rep.paired || fb.n_channels() != rep.n_channels {
        return Err(CoreError::ShapeMismatch(format!(
            "bank has {} channels (paired: {}), representation has {} (paired: {})",
            fb.n_channels(),
            fb.is_paired(),
            rep.n_channels,
            rep.paired
        )));
    }
    if fb.kernel_size() != rep.kernel_size || fb.stride() != rep.stride {
        return Err(CoreError::ShapeMismatch(format!(
            "bank kernel/stride {}/{} do not match representation {}/{}",
            fb.kernel_size(),
            fb.stride(),
            rep.kernel_size,
            rep.stride
        )));
    }
    Ok(())
}

fn overlap_add(fb: &Filterbank, rep: &TimeFrequencyRep) -> Vec<f64> {
    let (k, s) = (fb.kernel_size(), fb.stride());
    let padded_len = (rep.n_frames - 1) * s + k;
    let mut out = vec![0.0; padded_len];
    if fb.is_paired() {
        for c in 0..rep.n_channels {
            let row_re = fb.filter(2 * c);
            let row_im = fb.filter(2 * c + 1);
            for f in 0..rep.n_frames {
                let v = rep.frames[c * rep.n_frames + f];
                let seg = &mut out[f * s..f * s + k];
                for t in 0..k {
                    seg[t] += v.re * row_re[t] + v.im * row_im[t];
                }
            }
        }
    } else {
        for c in 0..rep.n_channels {
            let row = fb.filter(c);
            for f in 0..rep.n_frames {
                let v = rep.frames[c * rep.n_frames + f].re;
                let seg = &mut out[f * s..f * s + k];
                for t in 0..k {
                    seg[t] += v * row[t];
                }
            }
        }
    }
    out
}

/// Decodes by transposed convolution with overlap-add. Banks carrying a
/// window (DFT synthesis banks) are normalized by the squared-window
/// overlap envelope; decoders from `pseudo_inverse` are applied as-is.
/// The encoder's padding is trimmed so the output length equals the
/// encoded signal's.
pub fn decode(fb: &Filterbank, rep: &TimeFrequencyRep) -> Result<Waveform, CoreError> {
    check_decode_shapes(fb, rep)?;
    let (k, s) = (fb.kernel_size(), fb.stride());
    let mut out = overlap_add(fb, rep);
    if let Some(w) = fb.window() {
        let mut envelope = vec![0.0; out.len()];
        for f in 0..rep.n_frames {
            let seg = &mut envelope[f * s..f * s + k];
            for t in 0..k {
                seg[t] += w[t] * w[t];
            }
        }
        let pad = k - s;
        for n in pad..(pad + rep.n_samples).min(out.len()) {
            if envelope[n] <= 1e-12 {
                return Err(CoreError::SingularSystem(format!(
                    "window overlap envelope vanishes at sample {n}"
                )));
            }
            out[n] /= envelope[n];
        }
    }
    trim(out, k - s, rep)
}

/// Pure transposed convolution with the given filters: the exact adjoint
/// of `encode` with the same bank (no envelope normalization).
pub fn decode_unnormalized(fb: &Filterbank, rep: &TimeFrequencyRep) -> Result<Waveform, CoreError> {
    check_decode_shapes(fb, rep)?;
    let out = overlap_add(fb, rep);
    trim(out, fb.kernel_size() - fb.stride(), rep)
}

fn trim(padded: Vec<f64>, pad: usize, rep: &TimeFrequencyRep) -> Result<Waveform, CoreError> {
    if pad + rep.n_samples > padded.len() {
        return Err(CoreError::ShapeMismatch(format!(
            "decoded buffer of {} samples cannot cover {} original samples",
            padded.len(),
            rep.n_samples
        )));
    }
    Waveform::new(padded[pad..pad + rep.n_samples].to_vec(), rep.sample_rate_hz)
}

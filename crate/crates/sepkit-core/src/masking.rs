//! Oracle masks computed from encoded ground-truth sources, standing in
//! for a trained masker so the encoder-masker-decoder pipeline can be
//! exercised and measured end to end.

use alloc::format;
use alloc::vec::Vec;

use num_complex::ComplexFloat;

use crate::error::CoreError;
use crate::filterbank::{Filterbank, FilterbankKind};
use crate::signal::{SourceSet, Waveform};
use crate::transform::{apply_mask, decode, encode, Mask, TfMatrix, TimeFrequencyRep};

/// Denominator guard in ratio masks.
const RATIO_EPS: f64 = 1e-10;

/// Oracle mask family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMaskKind {
    /// Binary mask: 1 where the source dominates, ties to the lowest index.
    Ibm,
    /// Ratio of source power to total power.
    Irm,
    /// Ratio of source magnitude to total magnitude.
    MagnitudeRatio,
}

impl OracleMaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ibm => "ibm",
            Self::Irm => "irm",
            Self::MagnitudeRatio => "magnitude_ratio",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, CoreError> {
        match name {
            "ibm" => Ok(Self::Ibm),
            "irm" => Ok(Self::Irm),
            "magnitude_ratio" => Ok(Self::MagnitudeRatio),
            other => Err(CoreError::InvalidParameter(format!(
                "unknown oracle mask '{other}', expected one of ibm, irm, magnitude_ratio"
            ))),
        }
    }
}

/// Builds one mask per source from the sources' encoded representations.
///
/// At bins where every source is exactly silent, ratio masks fall back to
/// a uniform 1/J and the binary mask assigns the bin to source 0.
pub fn oracle_masks(
    sources_rep: &[TimeFrequencyRep],
    kind: OracleMaskKind,
) -> Result<Vec<Mask>, CoreError> {
    let first = sources_rep
        .first()
        .ok_or_else(|| CoreError::EmptyInput(format!("no source representations given")))?;
    let (ch, fr) = (first.n_channels(), first.n_frames());
    for (j, rep) in sources_rep.iter().enumerate() {
        if rep.n_channels() != ch || rep.n_frames() != fr {
            return Err(CoreError::ShapeMismatch(format!(
                "source {j} representation is {} x {}, source 0 is {ch} x {fr}",
                rep.n_channels(),
                rep.n_frames()
            )));
        }
    }
    let j_total = sources_rep.len();
    let cells = ch * fr;
    let mut masks: Vec<Vec<f64>> = (0..j_total).map(|_| alloc::vec![0.0; cells]).collect();
    for cell in 0..cells {
        match kind {
            OracleMaskKind::Ibm => {
                let mut best = 0;
                let mut best_mag = sources_rep[0].frames()[cell].abs();
                for (j, rep) in sources_rep.iter().enumerate().skip(1) {
                    let mag = rep.frames()[cell].abs();
                    if mag > best_mag {
                        best_mag = mag;
                        best = j;
                    }
                }
                masks[best][cell] = 1.0;
            }
            OracleMaskKind::Irm => {
                let powers: Vec<f64> =
                    sources_rep.iter().map(|r| r.frames()[cell].norm_sqr()).collect();
                let total: f64 = powers.iter().sum();
                for (j, p) in powers.iter().enumerate() {
                    masks[j][cell] = if total == 0.0 {
                        1.0 / j_total as f64
                    } else {
                        p / (total + RATIO_EPS)
                    };
                }
            }
            OracleMaskKind::MagnitudeRatio => {
                let mags: Vec<f64> = sources_rep.iter().map(|r| r.frames()[cell].abs()).collect();
                let total: f64 = mags.iter().sum();
                for (j, m) in mags.iter().enumerate() {
                    masks[j][cell] = if total == 0.0 {
                        1.0 / j_total as f64
                    } else {
                        m / (total + RATIO_EPS)
                    };
                }
            }
        }
    }
    masks
        .into_iter()
        .map(|values| Ok(Mask::Magnitude(TfMatrix::new(values, ch, fr)?)))
        .collect()
}

/// Full oracle pipeline: encode the mixture, mask it per source using
/// masks derived from the encoded ground truth, and decode each masked
/// representation back to a waveform of the original length.
pub fn oracle_separate(
    mixture: &Waveform,
    truth: &SourceSet,
    fb: &Filterbank,
    kind: OracleMaskKind,
) -> Result<SourceSet, CoreError> {
    if truth.n_samples() != mixture.len() || truth.sample_rate_hz() != mixture.sample_rate_hz {
        return Err(CoreError::ShapeMismatch(format!(
            "truth sources ({} samples at {} Hz) do not match the mixture ({} samples at {} Hz)",
            truth.n_samples(),
            truth.sample_rate_hz(),
            mixture.len(),
            mixture.sample_rate_hz
        )));
    }
    let mix_rep = encode(fb, mixture)?;
    let truth_reps: Vec<TimeFrequencyRep> = truth
        .iter()
        .map(|s| encode(fb, s))
        .collect::<Result<_, _>>()?;
    let masks = oracle_masks(&truth_reps, kind)?;
    let decoder = match fb.kind() {
        FilterbankKind::Stft => fb.synthesis()?,
        _ => fb.pseudo_inverse(crate::filterbank::DEFAULT_PINV_REGULARIZATION)?,
    };
    let estimates: Vec<Waveform> = masks
        .iter()
        .map(|m| decode(&decoder, &apply_mask(&mix_rep, m)?))
        .collect::<Result<_, _>>()?;
    SourceSet::new(estimates)
}

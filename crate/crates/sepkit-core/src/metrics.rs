//! Separation-quality metrics: SI-SDR, its improvement over the mixture,
//! and the filtered-projection SDR/SIR/SAR decomposition.
//!
//! The filtered-projection family measures each estimate against the
//! subspace spanned by FIR-filtered (shifted) copies of the references:
//! the part explained by the matching reference is the target, the extra
//! part explained by the remaining references is interference, and the
//! unexplained remainder is artifact. The three parts are mutually
//! orthogonal, so their energies add up to the estimate energy.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

// Needed for float math in no_std builds; test builds pull std into the
// crate graph and its inherent f64 methods shadow the trait.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::CoreError;
use crate::linalg::LuFactors;
use crate::pit::{pairwise_loss, PairwiseLossKind};
use crate::signal::{SourceSet, Waveform};

/// Reporting bound for dB outputs: ratios outside it are clamped, exact
/// zeros map to the bound itself. Intermediate math is never clamped.
pub const DB_CAP: f64 = 100.0;

/// Scale-invariant SDR in dB, higher is better.
pub fn si_sdr(est: &Waveform, reference: &Waveform) -> Result<f64, CoreError> {
    Ok(-pairwise_loss(PairwiseLossKind::NegSiSdr, est, reference)?)
}

/// SI-SDR gain of the estimate over just presenting the mixture. Passing
/// the mixture itself as the estimate returns exactly zero.
pub fn si_sdr_improvement(
    est: &Waveform,
    reference: &Waveform,
    mixture: &Waveform,
) -> Result<f64, CoreError> {
    Ok(si_sdr(est, reference)? - si_sdr(mixture, reference)?)
}

/// Energies of the orthogonal split of one estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct BssDecomposition {
    pub target_energy: f64,
    pub interference_energy: f64,
    pub artifact_energy: f64,
    pub estimate_energy: f64,
}

/// Per-source scores in dB, each capped to [-DB_CAP, DB_CAP].
#[derive(Debug, Clone, PartialEq)]
pub struct BssEvalScores {
    pub sdr: f64,
    pub sir: f64,
    pub sar: f64,
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Lag products sum_m a[m] * b[m + d] for d in -max_lag..=max_lag,
/// returned with d + max_lag as the index.
fn lag_products(a: &[f64], b: &[f64], max_lag: usize) -> Vec<f64> {
    let mut out = vec![0.0; 2 * max_lag + 1];
    for (idx, slot) in out.iter_mut().enumerate() {
        let d = idx as isize - max_lag as isize;
        let lo = if d < 0 { (-d) as usize } else { 0 };
        let hi = a.len().min((b.len() as isize - d).max(0) as usize);
        let mut sum = 0.0;
        for m in lo..hi {
            sum += a[m] * b[(m as isize + d) as usize];
        }
        *slot = sum;
    }
    out
}

fn add_shifted(acc: &mut [f64], src: &[f64], shift: usize, coef: f64) {
    for (m, &v) in src.iter().enumerate() {
        acc[m + shift] += coef * v;
    }
}

/// Splits every estimate into target, interference, and artifact
/// energies against length-`filter_len` FIR filterings of the references.
pub fn bss_eval_decompose(
    refs: &SourceSet,
    ests: &SourceSet,
    filter_len: usize,
) -> Result<Vec<BssDecomposition>, CoreError> {
    let n_src = refs.n_sources();
    if ests.n_sources() != n_src {
        return Err(CoreError::ShapeMismatch(format!(
            "{n_src} references but {} estimates",
            ests.n_sources()
        )));
    }
    if ests.n_samples() != refs.n_samples() {
        return Err(CoreError::ShapeMismatch(format!(
            "references have {} samples, estimates {}",
            refs.n_samples(),
            ests.n_samples()
        )));
    }
    let t_len = refs.n_samples();
    if filter_len == 0 || filter_len > t_len {
        return Err(CoreError::InvalidParameter(format!(
            "distortion filter length {filter_len} outside 1..={t_len}"
        )));
    }

    let ref_energies: Vec<f64> = (0..n_src).map(|j| energy(&refs[j].samples)).collect();
    for (j, &e) in ref_energies.iter().enumerate() {
        if e == 0.0 {
            return Err(CoreError::InvalidParameter(format!("reference {j} is all-zero")));
        }
    }
    for i in 0..n_src {
        for j in i + 1..n_src {
            let dot: f64 =
                refs[i].samples.iter().zip(&refs[j].samples).map(|(a, b)| a * b).sum();
            if dot * dot >= (1.0 - 1e-12) * ref_energies[i] * ref_energies[j] {
                return Err(CoreError::SingularSystem(format!(
                    "references {i} and {j} are collinear, the projection system is singular"
                )));
            }
        }
    }

    let l = filter_len;
    let max_lag = l - 1;
    // corr[j * n_src + k][d + max_lag] = sum_m ref_j[m] * ref_k[m + d];
    // the Gram entry for shifts (tau, tau') of (j, k) is that at d = tau - tau'.
    let corr: Vec<Vec<f64>> = (0..n_src * n_src)
        .map(|idx| lag_products(&refs[idx / n_src].samples, &refs[idx % n_src].samples, max_lag))
        .collect();

    let dim = n_src * l;
    let mut gram = vec![0.0; dim * dim];
    for j in 0..n_src {
        for tau in 0..l {
            let row = j * l + tau;
            for k in 0..n_src {
                let pair = &corr[j * n_src + k];
                for tau2 in 0..l {
                    let d = tau as isize - tau2 as isize;
                    gram[row * dim + k * l + tau2] = pair[(d + max_lag as isize) as usize];
                }
            }
        }
    }
    let singular_hint = |_| {
        CoreError::SingularSystem(format!(
            "shifted-reference system is singular; shorten the filter or check for duplicate references"
        ))
    };
    let lu_all = LuFactors::new(&gram, dim).map_err(singular_hint)?;
    let lu_matched: Vec<LuFactors> = (0..n_src)
        .map(|j| {
            let pair = &corr[j * n_src + j];
            let mut block = vec![0.0; l * l];
            for tau in 0..l {
                for tau2 in 0..l {
                    let d = tau as isize - tau2 as isize;
                    block[tau * l + tau2] = pair[(d + max_lag as isize) as usize];
                }
            }
            LuFactors::new(&block, l).map_err(singular_hint)
        })
        .collect::<Result<_, _>>()?;

    let padded_len = t_len + l - 1;
    let mut out = Vec::with_capacity(n_src);
    for i in 0..n_src {
        let est = &ests[i].samples;
        let mut cross = vec![0.0; dim];
        for j in 0..n_src {
            let r = &refs[j].samples;
            for tau in 0..l {
                let mut sum = 0.0;
                for m in 0..t_len - tau {
                    sum += r[m] * est[m + tau];
                }
                cross[j * l + tau] = sum;
            }
        }
        let alpha = lu_all.solve(&cross)?;
        let beta = lu_matched[i].solve(&cross[i * l..(i + 1) * l])?;

        let mut proj_all = vec![0.0; padded_len];
        for j in 0..n_src {
            for tau in 0..l {
                add_shifted(&mut proj_all, &refs[j].samples, tau, alpha[j * l + tau]);
            }
        }
        let mut target = vec![0.0; padded_len];
        for tau in 0..l {
            add_shifted(&mut target, &refs[i].samples, tau, beta[tau]);
        }

        let interference_energy: f64 = proj_all
            .iter()
            .zip(&target)
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        // The padded estimate is zero past t_len, so the artifact tail out
        // there is just the projection itself.
        let artifact_energy: f64 = proj_all
            .iter()
            .enumerate()
            .map(|(n, p)| {
                let e = if n < t_len { est[n] } else { 0.0 };
                (e - p) * (e - p)
            })
            .sum();
        out.push(BssDecomposition {
            target_energy: energy(&target),
            interference_energy,
            artifact_energy,
            estimate_energy: energy(est),
        });
    }
    Ok(out)
}

fn capped_db(numerator: f64, denominator: f64) -> f64 {
    if numerator == 0.0 {
        return -DB_CAP;
    }
    if denominator == 0.0 {
        return DB_CAP;
    }
    (10.0 * (numerator / denominator).log10()).clamp(-DB_CAP, DB_CAP)
}

/// Per-source SDR, SIR, and SAR in dB against `filter_len`-tap filtered
/// references. Estimates are compared index-to-index; align them first.
pub fn bss_eval(
    refs: &SourceSet,
    ests: &SourceSet,
    filter_len: usize,
) -> Result<Vec<BssEvalScores>, CoreError> {
    let parts = bss_eval_decompose(refs, ests, filter_len)?;
    Ok(parts
        .iter()
        .map(|p| BssEvalScores {
            sdr: capped_db(p.target_energy, p.interference_energy + p.artifact_energy),
            sir: capped_db(p.target_energy, p.interference_energy),
            sar: capped_db(p.target_energy + p.interference_energy, p.artifact_energy),
        })
        .collect())
}

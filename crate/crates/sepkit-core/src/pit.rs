//! Permutation-invariant losses.
//!
//! A pairwise loss compares one estimate against one reference; the
//! permutation-invariant wrapper finds the estimate-to-reference
//! assignment minimizing the reduced loss. The optimized path precomputes
//! the J x J pairwise matrix (J^2 loss evaluations) and searches
//! assignments on it; a generic whole-set enumeration over all J!
//! permutations is provided as the correctness oracle.

use alloc::format;
use alloc::vec::Vec;

// Needed for float math in no_std builds; test builds pull std into the
// crate graph and its inherent f64 methods shadow the trait.
#[allow(unused_imports)]
use num_traits::Float;

use crate::assignment::min_cost_assignment;
use crate::error::CoreError;
use crate::signal::{SourceSet, Waveform};

/// Ratio guard inside the SDR-family losses: perfect estimates return a
/// large finite loss instead of an infinity.
pub const SDR_EPS: f64 = 1e-8;

/// Largest J accepted by the factorial-time search paths.
pub const MAX_EXHAUSTIVE_SOURCES: usize = 10;

/// Pairwise losses; all are oriented so that lower is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairwiseLossKind {
    /// Negated scale-invariant SDR: both signals mean-centered, estimate
    /// projected onto the reference, ratio of target to residual energy.
    NegSiSdr,
    /// Same target projection, but the denominator is the raw
    /// estimate-minus-reference energy (scale-dependent).
    NegSdSdr,
    /// Negated SNR on uncentered signals.
    NegSnr,
    /// Mean squared sample difference.
    Mse,
}

impl PairwiseLossKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::NegSiSdr => "neg_si_sdr",
            Self::NegSdSdr => "neg_sd_sdr",
            Self::NegSnr => "neg_snr",
            Self::Mse => "mse",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, CoreError> {
        match name {
            "neg_si_sdr" => Ok(Self::NegSiSdr),
            "neg_sd_sdr" => Ok(Self::NegSdSdr),
            "neg_snr" => Ok(Self::NegSnr),
            "mse" => Ok(Self::Mse),
            other => Err(CoreError::InvalidParameter(format!(
                "unknown loss '{other}', expected one of neg_si_sdr, neg_sd_sdr, neg_snr, mse"
            ))),
        }
    }
}

/// How per-source losses collapse to one number. Both options are
/// separable and monotone, so the assignment search is exact for either.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceFn {
    Mean,
    Sum,
}

impl ReduceFn {
    fn reduce(&self, values: impl Iterator<Item = f64>, n: usize) -> f64 {
        let sum: f64 = values.sum();
        match self {
            Self::Mean => sum / n as f64,
            Self::Sum => sum,
        }
    }
}

/// Search strategy over assignments of the pairwise matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignmentAlgorithm {
    /// Lexicographic enumeration of all J! permutations; ties break to
    /// the lexicographically smallest. Guarded to J <= 10.
    Exhaustive,
    /// Cubic-time augmenting-path search; same minimum, but ties may
    /// resolve to a different permutation.
    Hungarian,
}

/// A bijection sending each reference slot to an estimate index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self, CoreError> {
        let n = map.len();
        let mut seen = alloc::vec![false; n];
        for &i in &map {
            if i >= n || seen[i] {
                return Err(CoreError::InvalidParameter(format!(
                    "mapping {map:?} is not a bijection on 0..{n}"
                )));
            }
            seen[i] = true;
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self { map: (0..n).collect() }
    }

    /// Estimate index assigned to reference slot `reference`.
    pub fn estimate_for(&self, reference: usize) -> usize {
        self.map[reference]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Advances `perm` to its lexicographic successor; false once `perm` was
/// the final (descending) arrangement.
pub(crate) fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// J x J matrix of pairwise losses, rows indexed by estimate and columns
/// by reference, with the number of pairwise evaluations it took to fill.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseLossMatrix {
    entries: Vec<f64>,
    size: usize,
    evaluations: usize,
}

impl PairwiseLossMatrix {
    pub fn from_entries(entries: Vec<f64>, size: usize) -> Result<Self, CoreError> {
        if entries.len() != size * size {
            return Err(CoreError::ShapeMismatch(format!(
                "{} entries cannot fill a {size} x {size} matrix",
                entries.len()
            )));
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::InvalidParameter(format!(
                "non-finite loss at flat index {i}"
            )));
        }
        Ok(Self { entries, size, evaluations: 0 })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn at(&self, estimate: usize, reference: usize) -> f64 {
        self.entries[estimate * self.size + reference]
    }

    /// Pairwise loss evaluations spent building this matrix; zero for
    /// matrices assembled from raw entries.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }
}

/// Result of a permutation-invariant loss computation.
#[derive(Debug, Clone, PartialEq)]
pub struct PitResult {
    pub loss: f64,
    pub permutation: Permutation,
    /// Pairwise loss evaluations spent; J^2 on the optimized path.
    pub pairwise_evaluations: usize,
}

fn centered(w: &Waveform) -> Vec<f64> {
    let mean = w.samples.iter().sum::<f64>() / w.len() as f64;
    w.samples.iter().map(|v| v - mean).collect()
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Loss between a single estimate and a single reference.
pub fn pairwise_loss(
    kind: PairwiseLossKind,
    est: &Waveform,
    reference: &Waveform,
) -> Result<f64, CoreError> {
    if est.len() != reference.len() {
        return Err(CoreError::ShapeMismatch(format!(
            "estimate has {} samples, reference has {}",
            est.len(),
            reference.len()
        )));
    }
    match kind {
        PairwiseLossKind::Mse => {
            let sum: f64 = est
                .samples
                .iter()
                .zip(&reference.samples)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            Ok(sum / est.len() as f64)
        }
        PairwiseLossKind::NegSnr => {
            let ref_energy = energy(&reference.samples);
            if ref_energy == 0.0 {
                return Err(CoreError::InvalidParameter(format!(
                    "zero reference signal in an SNR-family loss"
                )));
            }
            let err: f64 = est
                .samples
                .iter()
                .zip(&reference.samples)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            Ok(-10.0 * ((ref_energy + SDR_EPS) / (err + SDR_EPS)).log10())
        }
        PairwiseLossKind::NegSiSdr | PairwiseLossKind::NegSdSdr => {
            if energy(&reference.samples) == 0.0 {
                return Err(CoreError::InvalidParameter(format!(
                    "zero reference signal in an SDR-family loss"
                )));
            }
            let est_c = centered(est);
            let ref_c = centered(reference);
            let ref_energy = energy(&ref_c);
            if ref_energy == 0.0 {
                return Err(CoreError::InvalidParameter(format!(
                    "reference has zero power after mean removal"
                )));
            }
            let dot: f64 = est_c.iter().zip(&ref_c).map(|(a, b)| a * b).sum();
            let scale = dot / ref_energy;
            let target_energy = scale * scale * ref_energy;
            let denom = match kind {
                PairwiseLossKind::NegSiSdr => est_c
                    .iter()
                    .zip(&ref_c)
                    .map(|(a, b)| {
                        let d = a - scale * b;
                        d * d
                    })
                    .sum::<f64>(),
                _ => est_c
                    .iter()
                    .zip(&ref_c)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>(),
            };
            Ok(-10.0 * ((target_energy + SDR_EPS) / (denom + SDR_EPS)).log10())
        }
    }
}

/// Fills the J x J matrix with one pairwise loss per (estimate,
/// reference) cell, exactly J^2 evaluations.
pub fn pairwise_matrix(
    kind: PairwiseLossKind,
    ests: &SourceSet,
    refs: &SourceSet,
) -> Result<PairwiseLossMatrix, CoreError> {
    let j = ests.n_sources();
    if refs.n_sources() != j {
        return Err(CoreError::ShapeMismatch(format!(
            "{j} estimates but {} references",
            refs.n_sources()
        )));
    }
    let mut entries = Vec::with_capacity(j * j);
    let mut evaluations = 0usize;
    for i in 0..j {
        for r in 0..j {
            entries.push(pairwise_loss(kind, &ests[i], &refs[r])?);
            evaluations += 1;
        }
    }
    Ok(PairwiseLossMatrix { entries, size: j, evaluations })
}

/// Minimizes the reduced loss over assignments of a precomputed matrix.
///
/// Exhaustive search scans permutations in lexicographic order with a
/// strict improvement rule, so ties resolve to the lexicographically
/// smallest permutation. The augmenting-path search returns the same
/// minimum (its permutation may differ only on ties).
pub fn pit_from_matrix(
    m: &PairwiseLossMatrix,
    reduce: ReduceFn,
    algorithm: AssignmentAlgorithm,
) -> Result<(f64, Permutation), CoreError> {
    let j = m.size;
    if j == 0 {
        return Err(CoreError::EmptyInput(format!("empty loss matrix")));
    }
    match algorithm {
        AssignmentAlgorithm::Exhaustive => {
            if j > MAX_EXHAUSTIVE_SOURCES {
                return Err(CoreError::SizeLimit(format!(
                    "exhaustive search over {j}! permutations refused (limit {MAX_EXHAUSTIVE_SOURCES}); use the Hungarian algorithm"
                )));
            }
            let mut perm: Vec<usize> = (0..j).collect();
            let mut best_loss = f64::INFINITY;
            let mut best_perm = perm.clone();
            loop {
                let value = reduce.reduce((0..j).map(|r| m.at(perm[r], r)), j);
                if value < best_loss {
                    best_loss = value;
                    best_perm.copy_from_slice(&perm);
                }
                if !next_permutation(&mut perm) {
                    break;
                }
            }
            Ok((best_loss, Permutation { map: best_perm }))
        }
        AssignmentAlgorithm::Hungarian => {
            let assign = min_cost_assignment(&m.entries, j);
            let value = reduce.reduce((0..j).map(|r| m.at(assign[r], r)), j);
            Ok((value, Permutation { map: assign }))
        }
    }
}

/// Optimized permutation-invariant loss: J^2 pairwise evaluations, then
/// an exhaustive assignment search on the matrix.
pub fn pit_loss(
    kind: PairwiseLossKind,
    ests: &SourceSet,
    refs: &SourceSet,
    reduce: ReduceFn,
) -> Result<PitResult, CoreError> {
    let matrix = pairwise_matrix(kind, ests, refs)?;
    let (loss, permutation) = pit_from_matrix(&matrix, reduce, AssignmentAlgorithm::Exhaustive)?;
    Ok(PitResult { loss, permutation, pairwise_evaluations: matrix.evaluations })
}

/// Unoptimized reference path: evaluates a caller-supplied whole-set loss
/// for every one of the J! permutations and keeps the strict minimum, so
/// ties resolve to the lexicographically smallest permutation.
pub fn pit_set_loss<L>(n_sources: usize, mut set_loss: L) -> Result<(f64, Permutation), CoreError>
where
    L: FnMut(&Permutation) -> Result<f64, CoreError>,
{
    if n_sources == 0 {
        return Err(CoreError::EmptyInput(format!("no sources to permute")));
    }
    if n_sources > MAX_EXHAUSTIVE_SOURCES {
        return Err(CoreError::SizeLimit(format!(
            "enumeration over {n_sources}! permutations refused (limit {MAX_EXHAUSTIVE_SOURCES})"
        )));
    }
    let mut perm: Vec<usize> = (0..n_sources).collect();
    let mut best_loss = f64::INFINITY;
    let mut best_perm = perm.clone();
    loop {
        let candidate = Permutation { map: perm.clone() };
        let value = set_loss(&candidate)?;
        if value < best_loss {
            best_loss = value;
            best_perm.copy_from_slice(&perm);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok((best_loss, Permutation { map: best_perm }))
}

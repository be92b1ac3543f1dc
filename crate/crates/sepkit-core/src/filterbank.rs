//! Analysis and synthesis filterbanks applied by strided convolution.
//!
//! Every bank is a flat real matrix of FIR filters plus a stride. Complex
//! channels are represented by (real, imaginary) row pairs: row `2k` and
//! row `2k+1` together form complex channel `k`. Four constructions are
//! provided: windowed DFT banks (`stft`), seeded random banks (`free`),
//! random banks completed to analytic pairs by a discrete Hilbert
//! transform (`analytic_free`), and mel-spaced band-pass sinc pairs
//! (`sinc`). Decoders come from either the matched-window synthesis
//! scaling (`synthesis`, stft only) or a regularized least-squares
//! pseudo-inverse (`pseudo_inverse`, any kind).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex;
// Needed for float math in no_std builds; test builds pull std into the
// crate graph and its inherent f64 methods shadow the trait.
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::CoreError;
use crate::linalg::LuFactors;

pub type Complex64 = Complex<f64>;

const PI: f64 = core::f64::consts::PI;

/// Default ridge term for `pseudo_inverse`.
pub const DEFAULT_PINV_REGULARIZATION: f64 = 1e-8;

/// Analysis window applied inside DFT banks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    SqrtHann,
    Hann,
    Rect,
}

impl Window {
    /// Parses a window name as used in configuration files.
    pub fn from_name(name: &str) -> Result<Self, CoreError> {
        match name {
            "sqrt_hann" => Ok(Self::SqrtHann),
            "hann" => Ok(Self::Hann),
            "rect" => Ok(Self::Rect),
            other => Err(CoreError::InvalidParameter(format!(
                "unknown window '{other}', expected one of sqrt_hann, hann, rect"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::SqrtHann => "sqrt_hann",
            Self::Hann => "hann",
            Self::Rect => "rect",
        }
    }

    /// Samples the window on `n` points (periodic form, so 50% overlap-add
    /// of the squared sqrt_hann window sums to one).
    pub fn sample(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|t| {
                let hann = 0.5 * (1.0 - (2.0 * PI * t as f64 / n as f64).cos());
                match self {
                    Self::SqrtHann => hann.sqrt(),
                    Self::Hann => hann,
                    Self::Rect => 1.0,
                }
            })
            .collect()
    }
}

/// Construction family of a filterbank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterbankKind {
    Stft,
    Free,
    AnalyticFree,
    Sinc,
}

impl FilterbankKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Stft => "stft",
            Self::Free => "free",
            Self::AnalyticFree => "analytic_free",
            Self::Sinc => "sinc",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, CoreError> {
        match name {
            "stft" => Ok(Self::Stft),
            "free" => Ok(Self::Free),
            "analytic_free" => Ok(Self::AnalyticFree),
            "sinc" => Ok(Self::Sinc),
            other => Err(CoreError::InvalidParameter(format!(
                "unknown filterbank kind '{other}', expected one of stft, free, analytic_free, sinc"
            ))),
        }
    }
}

/// A bank of FIR filters with a common stride.
#[derive(Debug, Clone, PartialEq)]
pub struct Filterbank {
    filters: Vec<f64>,
    n_filters: usize,
    kernel_size: usize,
    stride: usize,
    kind: FilterbankKind,
    paired: bool,
    /// Analysis window for DFT banks; its squared overlap-add envelope
    /// normalizes `decode`. Decoders built by `pseudo_inverse` carry no
    /// window because the inverse scaling is baked into their rows.
    window: Option<Vec<f64>>,
    /// Band edges (low, high) in Hz for sinc banks, one per channel.
    band_edges_hz: Option<Vec<(f64, f64)>>,
}

impl Filterbank {
    fn validate_shape(n_filters: usize, kernel_size: usize, stride: usize) -> Result<(), CoreError> {
        if n_filters == 0 || kernel_size == 0 {
            return Err(CoreError::InvalidParameter(format!(
                "filterbank needs at least one filter and one tap"
            )));
        }
        if stride == 0 || stride > kernel_size {
            return Err(CoreError::InvalidParameter(format!(
                "stride {stride} must satisfy 1 <= stride <= kernel_size {kernel_size}"
            )));
        }
        Ok(())
    }

    /// Builds a bank from raw coefficients. Used by file import; the
    /// dedicated constructors below are preferred.
    pub fn from_raw(
        filters: Vec<f64>,
        kernel_size: usize,
        stride: usize,
        kind: FilterbankKind,
        window: Option<Vec<f64>>,
    ) -> Result<Self, CoreError> {
        if kernel_size == 0 || filters.len() % kernel_size != 0 {
            return Err(CoreError::ShapeMismatch(format!(
                "coefficient buffer of {} entries is not a multiple of kernel_size {kernel_size}",
                filters.len()
            )));
        }
        let n_filters = filters.len() / kernel_size;
        Self::validate_shape(n_filters, kernel_size, stride)?;
        let paired = !matches!(kind, FilterbankKind::Free);
        if paired && n_filters % 2 != 0 {
            return Err(CoreError::InvalidParameter(format!(
                "kind {} pairs rows into complex channels and needs an even filter count, got {n_filters}",
                kind.name()
            )));
        }
        if let Some(w) = &window {
            if w.len() != kernel_size {
                return Err(CoreError::ShapeMismatch(format!(
                    "window has {} taps, kernel has {kernel_size}",
                    w.len()
                )));
            }
        }
        Ok(Self {
            filters,
            n_filters,
            kernel_size,
            stride,
            kind,
            paired,
            window,
            band_edges_hz: None,
        })
    }

    /// Windowed DFT analysis bank: `2 * (n_fft / 2 + 1)` filters where the
    /// pair for bin k is `(w[t] cos(2 pi k t / n_fft), -w[t] sin(2 pi k t / n_fft))`,
    /// so encoding computes the unnormalized windowed DFT of each frame.
    pub fn stft(n_fft: usize, hop: usize, window: Window) -> Result<Self, CoreError> {
        if n_fft < 4 || n_fft % 2 != 0 {
            return Err(CoreError::InvalidParameter(format!(
                "n_fft must be an even integer >= 4, got {n_fft}"
            )));
        }
        if hop == 0 || hop > n_fft {
            return Err(CoreError::InvalidParameter(format!(
                "hop {hop} must satisfy 1 <= hop <= n_fft {n_fft}"
            )));
        }
        if n_fft % hop != 0 {
            return Err(CoreError::InvalidParameter(format!(
                "hop {hop} must divide n_fft {n_fft}"
            )));
        }
        let w = window.sample(n_fft);
        let n_bins = n_fft / 2 + 1;
        let mut filters = vec![0.0; 2 * n_bins * n_fft];
        for k in 0..n_bins {
            for t in 0..n_fft {
                let angle = 2.0 * PI * (k * t) as f64 / n_fft as f64;
                filters[(2 * k) * n_fft + t] = w[t] * angle.cos();
                filters[(2 * k + 1) * n_fft + t] = -w[t] * angle.sin();
            }
        }
        Ok(Self {
            filters,
            n_filters: 2 * n_bins,
            kernel_size: n_fft,
            stride: hop,
            kind: FilterbankKind::Stft,
            paired: true,
            window: Some(w),
            band_edges_hz: None,
        })
    }

    /// Seeded random bank: rows drawn from a standard normal, each
    /// normalized to unit L2 norm. Channels are real (unpaired).
    pub fn free(
        n_filters: usize,
        kernel_size: usize,
        stride: usize,
        seed: u64,
    ) -> Result<Self, CoreError> {
        Self::validate_shape(n_filters, kernel_size, stride)?;
        let filters = random_unit_rows(n_filters, kernel_size, seed)?;
        Ok(Self {
            filters,
            n_filters,
            kernel_size,
            stride,
            kind: FilterbankKind::Free,
            paired: false,
            window: None,
            band_edges_hz: None,
        })
    }

    /// Seeded random bank completed to analytic pairs: even rows are free
    /// filters, each odd row is the discrete Hilbert transform of the row
    /// above, so channel spectra vanish at negative frequencies.
    pub fn analytic_free(
        n_filters: usize,
        kernel_size: usize,
        stride: usize,
        seed: u64,
    ) -> Result<Self, CoreError> {
        if n_filters % 2 != 0 {
            return Err(CoreError::InvalidParameter(format!(
                "analytic banks need an even filter count, got {n_filters}"
            )));
        }
        Self::validate_shape(n_filters, kernel_size, stride)?;
        let base = random_unit_rows(n_filters / 2, kernel_size, seed)?;
        let mut filters = vec![0.0; n_filters * kernel_size];
        for k in 0..n_filters / 2 {
            let row = &base[k * kernel_size..(k + 1) * kernel_size];
            let quadrature = hilbert_transform(row);
            filters[(2 * k) * kernel_size..(2 * k + 1) * kernel_size].copy_from_slice(row);
            filters[(2 * k + 1) * kernel_size..(2 * k + 2) * kernel_size]
                .copy_from_slice(&quadrature);
        }
        Ok(Self {
            filters,
            n_filters,
            kernel_size,
            stride,
            kind: FilterbankKind::AnalyticFree,
            paired: true,
            window: None,
            band_edges_hz: None,
        })
    }

    /// Band-pass sinc pairs with cutoffs spaced on the mel scale between
    /// `min_low_hz` and the Nyquist frequency. The cosine-phase row is
    /// `2 f2 sinc(2 pi f2 t) - 2 f1 sinc(2 pi f1 t)` under a Hamming
    /// window; the odd row is its sine-phase (Hilbert) partner.
    pub fn sinc(
        n_filters: usize,
        kernel_size: usize,
        stride: usize,
        sample_rate_hz: u32,
        min_low_hz: f64,
        min_band_hz: f64,
    ) -> Result<Self, CoreError> {
        if n_filters % 2 != 0 || n_filters == 0 {
            return Err(CoreError::InvalidParameter(format!(
                "sinc banks need a positive even filter count, got {n_filters}"
            )));
        }
        if kernel_size % 2 == 0 {
            return Err(CoreError::InvalidParameter(format!(
                "sinc kernels need odd length for symmetric support, got {kernel_size}"
            )));
        }
        Self::validate_shape(n_filters, kernel_size, stride)?;
        if sample_rate_hz == 0 {
            return Err(CoreError::InvalidParameter(format!("sample rate must be positive")));
        }
        let nyquist = sample_rate_hz as f64 / 2.0;
        if min_low_hz < 0.0 || min_band_hz < 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "band parameters must be non-negative"
            )));
        }
        if min_low_hz + min_band_hz >= nyquist {
            return Err(CoreError::InvalidParameter(format!(
                "band limits (low {min_low_hz} Hz + width {min_band_hz} Hz) reach past Nyquist {nyquist} Hz"
            )));
        }

        let n_channels = n_filters / 2;
        let mel_lo = mel_from_hz(min_low_hz);
        let mel_hi = mel_from_hz(nyquist);
        let mut edges = Vec::with_capacity(n_channels);
        for c in 0..n_channels {
            let m1 = mel_lo + (mel_hi - mel_lo) * c as f64 / n_channels as f64;
            let m2 = mel_lo + (mel_hi - mel_lo) * (c + 1) as f64 / n_channels as f64;
            let f1 = hz_from_mel(m1);
            let f2 = (hz_from_mel(m2).max(f1 + min_band_hz)).min(nyquist);
            if f2 <= f1 {
                return Err(CoreError::InvalidParameter(format!(
                    "channel {c} clamps to a degenerate band at {f1} Hz"
                )));
            }
            edges.push((f1, f2));
        }

        let fs = sample_rate_hz as f64;
        let center = (kernel_size - 1) as isize / 2;
        let mut filters = vec![0.0; n_filters * kernel_size];
        for (c, &(f1, f2)) in edges.iter().enumerate() {
            let (v1, v2) = (f1 / fs, f2 / fs);
            for t in 0..kernel_size {
                let m = t as isize - center;
                let ham = 0.54 - 0.46 * (2.0 * PI * t as f64 / (kernel_size - 1) as f64).cos();
                let (cos_phase, sin_phase) = if m == 0 {
                    (2.0 * (v2 - v1), 0.0)
                } else {
                    let mf = m as f64;
                    (
                        ((2.0 * PI * v2 * mf).sin() - (2.0 * PI * v1 * mf).sin()) / (PI * mf),
                        ((2.0 * PI * v1 * mf).cos() - (2.0 * PI * v2 * mf).cos()) / (PI * mf),
                    )
                };
                filters[(2 * c) * kernel_size + t] = ham * cos_phase;
                filters[(2 * c + 1) * kernel_size + t] = ham * sin_phase;
            }
        }
        Ok(Self {
            filters,
            n_filters,
            kernel_size,
            stride,
            kind: FilterbankKind::Sinc,
            paired: true,
            window: None,
            band_edges_hz: Some(edges),
        })
    }

    pub fn n_filters(&self) -> usize {
        self.n_filters
    }

    /// Complex channels: half the filter count for paired kinds.
    pub fn n_channels(&self) -> usize {
        if self.paired {
            self.n_filters / 2
        } else {
            self.n_filters
        }
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn kind(&self) -> FilterbankKind {
        self.kind
    }

    pub fn is_paired(&self) -> bool {
        self.paired
    }

    pub fn filters(&self) -> &[f64] {
        &self.filters
    }

    pub fn filter(&self, row: usize) -> &[f64] {
        &self.filters[row * self.kernel_size..(row + 1) * self.kernel_size]
    }

    pub fn window(&self) -> Option<&[f64]> {
        self.window.as_deref()
    }

    pub fn band_edges_hz(&self) -> Option<&[(f64, f64)]> {
        self.band_edges_hz.as_deref()
    }

    /// Matched-window synthesis bank for DFT analysis banks.
    ///
    /// Each analysis row is scaled by the inverse-DFT weight of its bin
    /// (1/n_fft at DC and Nyquist, 2/n_fft elsewhere); together with the
    /// squared-window envelope division in `decode` this reconstructs the
    /// input exactly wherever the window overlap covers it.
    pub fn synthesis(&self) -> Result<Self, CoreError> {
        if self.kind != FilterbankKind::Stft {
            return Err(CoreError::InvalidParameter(format!(
                "synthesis scaling is defined for stft banks; use pseudo_inverse for {} banks",
                self.kind.name()
            )));
        }
        let n_fft = self.kernel_size;
        let n_bins = self.n_filters / 2;
        let mut filters = self.filters.clone();
        for k in 0..n_bins {
            let weight = if k == 0 || k == n_bins - 1 {
                1.0 / n_fft as f64
            } else {
                2.0 / n_fft as f64
            };
            for t in 0..n_fft {
                filters[(2 * k) * n_fft + t] *= weight;
                filters[(2 * k + 1) * n_fft + t] *= weight;
            }
        }
        Ok(Self { filters, ..self.clone() })
    }

    /// Least-squares decoder: rows of `F (F^T F + lambda I)^-1`, scaled by
    /// stride / kernel_size so overlap-add does not multiply the output by
    /// the frame coverage count. Carries no window, so `decode` applies it
    /// as a plain transposed convolution.
    pub fn pseudo_inverse(&self, regularization: f64) -> Result<Self, CoreError> {
        if regularization < 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "regularization must be non-negative, got {regularization}"
            )));
        }
        let (n, k) = (self.n_filters, self.kernel_size);
        // Gram matrix F^T F + lambda I, shape k x k.
        let mut gram = vec![0.0; k * k];
        for row in 0..n {
            let f = self.filter(row);
            for a in 0..k {
                if f[a] == 0.0 {
                    continue;
                }
                for b in 0..k {
                    gram[a * k + b] += f[a] * f[b];
                }
            }
        }
        for a in 0..k {
            gram[a * k + a] += regularization;
        }
        let lu = LuFactors::new(&gram, k).map_err(|e| match e {
            CoreError::SingularSystem(msg) => CoreError::SingularSystem(format!(
                "{msg}; the bank is rank-deficient, raise the regularization"
            )),
            other => other,
        })?;
        // Solve (F^T F + lambda I) M = F^T, then the decoder is M^T.
        let mut ft = vec![0.0; k * n];
        for row in 0..n {
            for t in 0..k {
                ft[t * n + row] = self.filters[row * k + t];
            }
        }
        let m = lu.solve_block(&ft, n)?;
        let coverage_scale = self.stride as f64 / k as f64;
        let mut filters = vec![0.0; n * k];
        for row in 0..n {
            for t in 0..k {
                filters[row * k + t] = m[t * n + row] * coverage_scale;
            }
        }
        Ok(Self {
            filters,
            n_filters: n,
            kernel_size: k,
            stride: self.stride,
            kind: self.kind,
            paired: self.paired,
            window: None,
            band_edges_hz: self.band_edges_hz.clone(),
        })
    }
}

fn random_unit_rows(rows: usize, taps: usize, seed: u64) -> Result<Vec<f64>, CoreError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let mut filters: Vec<f64> = (0..rows * taps).map(|_| normal.sample(&mut rng)).collect();
    for r in 0..rows {
        let row = &mut filters[r * taps..(r + 1) * taps];
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(CoreError::SingularSystem(format!(
                "drawn filter row {r} is identically zero"
            )));
        }
        for v in row.iter_mut() {
            *v /= norm;
        }
    }
    Ok(filters)
}

/// Discrete Hilbert transform via the DFT: zero the negative frequencies,
/// double the positive ones (DC and Nyquist kept as-is), invert, and take
/// the imaginary part.
pub fn hilbert_transform(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let x: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut spectrum = dft(&x);
    let half = n / 2;
    for (k, value) in spectrum.iter_mut().enumerate() {
        if k == 0 || (n % 2 == 0 && k == half) {
            // keep
        } else if k < half || (n % 2 == 1 && k == half) {
            *value *= 2.0;
        } else {
            *value = Complex64::new(0.0, 0.0);
        }
    }
    idft(&spectrum).iter().map(|c| c.im).collect()
}

/// Mel scale: `2595 log10(1 + f / 700)`.
pub fn mel_from_hz(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn hz_from_mel(mel: f64) -> f64 {
    700.0 * (10.0_f64.powf(mel / 2595.0) - 1.0)
}

/// Unnormalized forward DFT, `X[k] = sum_t x[t] e^{-2 pi i k t / n}`.
/// Quadratic time; kernels here are short enough that this is fine.
pub(crate) fn dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let angle = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                acc += v * Complex64::new(angle.cos(), angle.sin());
            }
            acc
        })
        .collect()
}

pub(crate) fn idft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|t| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &v) in x.iter().enumerate() {
                let angle = 2.0 * PI * ((k * t) % n) as f64 / n as f64;
                acc += v * Complex64::new(angle.cos(), angle.sin());
            }
            acc / n as f64
        })
        .collect()
}

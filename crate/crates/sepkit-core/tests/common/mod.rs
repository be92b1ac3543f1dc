//! Deterministic signal builders shared by the integration tests.
//! A small LCG keeps them independent of the crate's own RNG choices.

// Each test binary compiles this module separately and none uses all of it.
#![allow(dead_code)]

use sepkit_core::signal::Waveform;

pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9e3779b97f4a7c15) | 1)
    }

    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64) / ((1u64 << 53) as f64)
    }

    /// Uniform in [-0.5, 0.5).
    pub fn centered(&mut self) -> f64 {
        self.next_f64() - 0.5
    }
}

pub fn noise(n: usize, sample_rate_hz: u32, seed: u64) -> Waveform {
    let mut rng = Lcg::new(seed);
    Waveform::new((0..n).map(|_| rng.centered()).collect(), sample_rate_hz).unwrap()
}

/// Sum of a few enveloped sinusoids plus low-level noise; close enough to
/// speech-shaped material for phase and masking experiments.
pub fn multisine(n: usize, sample_rate_hz: u32, seed: u64) -> Waveform {
    let mut rng = Lcg::new(seed);
    let n_partials = 2 + (rng.next_f64() * 3.0) as usize;
    let mut samples = vec![0.0f64; n];
    for _ in 0..n_partials {
        let freq = 150.0 + rng.next_f64() * 1800.0;
        let phase = rng.next_f64() * core::f64::consts::TAU;
        let amp = 0.2 + rng.next_f64() * 0.5;
        let rate = sample_rate_hz as f64;
        for (t, s) in samples.iter_mut().enumerate() {
            let env = (core::f64::consts::PI * t as f64 / n as f64).sin();
            *s += amp * env * (core::f64::consts::TAU * freq * t as f64 / rate + phase).sin();
        }
    }
    for s in samples.iter_mut() {
        *s += 0.01 * rng.centered();
    }
    Waveform::new(samples, sample_rate_hz).unwrap()
}

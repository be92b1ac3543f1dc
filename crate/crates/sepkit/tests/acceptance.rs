//! Release gate: one test per acceptance criterion. Each test prints a
//! single verdict line with the measured numbers (visible with
//! `--nocapture`, and always on failure) and then asserts the bound.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use sepkit::evalset::MetricRecord;
use sepkit_core::filterbank::{Filterbank, Window};
use sepkit_core::metrics::{bss_eval, bss_eval_decompose, si_sdr, si_sdr_improvement};
use sepkit_core::phase::{griffin_lim, misi, InitPhase, PhaseReconConfig};
use sepkit_core::pit::{
    pairwise_loss, pit_from_matrix, pit_loss, pit_set_loss, AssignmentAlgorithm,
    PairwiseLossKind, PairwiseLossMatrix, ReduceFn,
};
use sepkit_core::signal::{SourceSet, Waveform};
use sepkit_core::transform::{decode, encode, polar};

fn conclude(criterion: &str, ok: bool, detail: &str) {
    println!("criterion {criterion}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {criterion}: {detail}");
}

// ---------------------------------------------------------------------------
// Deterministic signal builders, independent of the library's RNG choices.

struct Lcg(u64);

impl Lcg {
    fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9e3779b97f4a7c15) | 1)
    }

    fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64) / ((1u64 << 53) as f64)
    }

    fn centered(&mut self) -> f64 {
        self.next_f64() - 0.5
    }
}

fn noise(n: usize, sample_rate_hz: u32, seed: u64) -> Waveform {
    let mut rng = Lcg::new(seed);
    Waveform::new((0..n).map(|_| rng.centered()).collect(), sample_rate_hz).unwrap()
}

fn multisine(n: usize, sample_rate_hz: u32, seed: u64) -> Waveform {
    let mut rng = Lcg::new(seed);
    let n_partials = 2 + (rng.next_f64() * 3.0) as usize;
    let mut samples = vec![0.0f64; n];
    for _ in 0..n_partials {
        let freq = 150.0 + rng.next_f64() * 1800.0;
        let phase = rng.next_f64() * std::f64::consts::TAU;
        let amp = 0.2 + rng.next_f64() * 0.5;
        let rate = sample_rate_hz as f64;
        for (t, s) in samples.iter_mut().enumerate() {
            let env = (std::f64::consts::PI * t as f64 / n as f64).sin();
            *s += amp * env * (std::f64::consts::TAU * freq * t as f64 / rate + phase).sin();
        }
    }
    for s in samples.iter_mut() {
        *s += 0.01 * rng.centered();
    }
    Waveform::new(samples, sample_rate_hz).unwrap()
}

fn random_set(j: usize, n: usize, seed: u64) -> SourceSet {
    SourceSet::new((0..j).map(|i| noise(n, 8000, seed * 1000 + i as u64)).collect()).unwrap()
}

fn mean_center(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

/// Removes the component of `v` along `onto` (both assumed mean-free).
fn orthogonalize(v: &mut [f64], onto: &[f64]) {
    let dot: f64 = v.iter().zip(onto).map(|(a, b)| a * b).sum();
    let norm: f64 = onto.iter().map(|b| b * b).sum();
    for (a, b) in v.iter_mut().zip(onto) {
        *a -= dot / norm * b;
    }
}

fn energy(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_1_stft_round_trip_is_lossless() {
    let fb = Filterbank::stft(512, 256, Window::SqrtHann).unwrap();
    let synthesis = fb.synthesis().unwrap();
    let x = noise(8192, 8000, 7); // just over one second
    let started = Instant::now();
    let rep = encode(&fb, &x).unwrap();
    let y = decode(&synthesis, &rep).unwrap();
    let elapsed = started.elapsed();

    let err: f64 = x.samples.iter().zip(&y.samples).map(|(a, b)| (a - b) * (a - b)).sum();
    let rel = (err / energy(&x.samples)).sqrt();
    let ok = y.len() == x.len() && rel < 1e-6 && elapsed < Duration::from_secs(1);
    conclude(
        "1 (STFT round trip)",
        ok,
        &format!("relative L2 error {rel:.2e}, encode+decode in {elapsed:.2?}"),
    );
}

#[test]
fn criterion_2_matrix_pit_equals_naive_enumeration() {
    const KINDS: [PairwiseLossKind; 4] = [
        PairwiseLossKind::NegSiSdr,
        PairwiseLossKind::NegSdSdr,
        PairwiseLossKind::NegSnr,
        PairwiseLossKind::Mse,
    ];
    let started = Instant::now();
    let mut compared = 0usize;
    for j in 2..=5usize {
        for trial in 0..100u64 {
            let ests = random_set(j, 256, trial * 31 + j as u64);
            let refs = random_set(j, 256, trial * 31 + j as u64 + 7000);
            for kind in KINDS {
                let optimized = pit_loss(kind, &ests, &refs, ReduceFn::Mean).unwrap();
                let (naive_loss, naive_perm) = pit_set_loss(j, |perm| {
                    let mut sum = 0.0;
                    for r in 0..j {
                        sum += pairwise_loss(kind, &ests[perm.estimate_for(r)], &refs[r])?;
                    }
                    Ok(sum / j as f64)
                })
                .unwrap();
                assert_eq!(
                    optimized.loss, naive_loss,
                    "j {j} trial {trial} {}: losses differ",
                    kind.name()
                );
                assert_eq!(
                    optimized.permutation, naive_perm,
                    "j {j} trial {trial} {}: permutations differ",
                    kind.name()
                );
                assert_eq!(optimized.pairwise_evaluations, j * j);
                compared += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    let ok = compared == 4 * 100 * 4 && elapsed < Duration::from_secs(30);
    conclude(
        "2 (matrix path vs enumeration)",
        ok,
        &format!("{compared} solves bit-identical, J^2 evaluations each, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_3_hungarian_equals_exhaustive_minima() {
    let mut rng = Lcg::new(303);
    let mut worst = 0.0f64;
    for j in 2..=8usize {
        for _ in 0..100 {
            let entries: Vec<f64> = (0..j * j).map(|_| (rng.next_f64() - 0.5) * 40.0).collect();
            let m = PairwiseLossMatrix::from_entries(entries, j).unwrap();
            let (le, _) = pit_from_matrix(&m, ReduceFn::Mean, AssignmentAlgorithm::Exhaustive).unwrap();
            let (lh, _) = pit_from_matrix(&m, ReduceFn::Mean, AssignmentAlgorithm::Hungarian).unwrap();
            worst = worst.max((le - lh).abs());
        }
    }
    conclude(
        "3 (Hungarian vs exhaustive)",
        worst <= 1e-12,
        &format!("700 matrices, worst minimum gap {worst:.2e}"),
    );
}

#[test]
fn criterion_4_si_sdr_scale_and_baseline_properties() {
    // A reference with plenty of energy and an exactly orthogonal
    // perturbation at 1% of its energy: 20 dB by construction.
    let mut reference: Vec<f64> = noise(4000, 8000, 11).samples.iter().map(|v| 4.0 * v).collect();
    mean_center(&mut reference);
    let mut residual = noise(4000, 8000, 12).samples;
    mean_center(&mut residual);
    orthogonalize(&mut residual, &reference);
    let gain = (energy(&reference) / (100.0 * energy(&residual))).sqrt();
    let est: Vec<f64> =
        reference.iter().zip(&residual).map(|(r, w)| r + gain * w).collect();

    let reference = Waveform::new(reference, 8000).unwrap();
    let base =
        si_sdr(&Waveform::new(est.clone(), 8000).unwrap(), &reference).unwrap();
    let mut worst_scale_dev = 0.0f64;
    for alpha in [0.1, 1.0, 10.0] {
        let scaled =
            Waveform::new(est.iter().map(|v| alpha * v).collect(), 8000).unwrap();
        worst_scale_dev = worst_scale_dev.max((si_sdr(&scaled, &reference).unwrap() - base).abs());
    }

    // The unseparated mixture as its own estimate improves on itself by
    // exactly nothing.
    let other = multisine(4000, 8000, 13);
    let mixture = Waveform::new(
        reference.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect(),
        8000,
    )
    .unwrap();
    let improvement = si_sdr_improvement(&mixture, &reference, &mixture).unwrap();

    let ok = worst_scale_dev < 1e-6 && (base - 20.0).abs() <= 0.01 && improvement == 0.0;
    conclude(
        "4 (SI-SDR properties)",
        ok,
        &format!(
            "scale deviation {worst_scale_dev:.2e} dB, orthogonal construction {base:.4} dB, \
             mixture-as-estimate improvement {improvement} dB"
        ),
    );
}

#[test]
fn criterion_5_griffin_lim_error_shrinks_monotonically() {
    let fb = Filterbank::stft(512, 128, Window::SqrtHann).unwrap();
    let target = polar(&encode(&fb, &multisine(4000, 8000, 31)).unwrap()).0;
    let cfg = PhaseReconConfig { n_iters: 100, momentum: 0.0, init_phase: InitPhase::Zero };
    let (_, trace) = griffin_lim(&target, &fb, 8000, &cfg).unwrap();

    let monotone = trace.windows(2).all(|p| p[1] <= p[0] + 1e-10);
    let ratio = trace[99] / trace[0];
    conclude(
        "5 (Griffin-Lim monotonicity)",
        monotone && ratio < 0.1,
        &format!("trace non-increasing over 100 iterations, final/initial error {ratio:.4}"),
    );
}

#[test]
fn criterion_6_misi_estimates_stay_mixture_consistent() {
    let fb = Filterbank::stft(256, 64, Window::SqrtHann).unwrap();
    let s1 = multisine(4000, 8000, 41);
    let s2 = multisine(4000, 8000, 42);
    let mixture = Waveform::new(
        s1.samples.iter().zip(&s2.samples).map(|(a, b)| a + b).collect(),
        8000,
    )
    .unwrap();
    let mags = [
        polar(&encode(&fb, &s1).unwrap()).0,
        polar(&encode(&fb, &s2).unwrap()).0,
    ];
    let cfg = PhaseReconConfig { n_iters: 50, ..PhaseReconConfig::for_misi() };
    let result = misi(&mixture, &mags, &fb, &cfg).unwrap();

    let worst = result.residual_trace.iter().fold(0.0f64, |m, &r| m.max(r));
    conclude(
        "6 (MISI mixture consistency)",
        result.residual_trace.len() == 50 && worst < 1e-6,
        &format!("worst max-norm residual over 50 iterations {worst:.2e}"),
    );
}

#[test]
fn criterion_7_bss_eval_energy_identity_and_known_sir() {
    // Energy identity and SIR >= SDR across random mixing cases.
    let mut worst_identity = 0.0f64;
    let mut ordering_holds = true;
    for case in 0..100u64 {
        let j = 2 + (case % 3) as usize;
        let filter_len = [1usize, 2, 8][(case % 3) as usize];
        let refs = random_set(j, 1000, case + 1);
        let mut rng = Lcg::new(case + 4000);
        let ests = SourceSet::new(
            (0..j)
                .map(|a| {
                    let mut samples = vec![0.0f64; 1000];
                    for b in 0..j {
                        let c = if a == b { 1.0 } else { (rng.next_f64() - 0.5) * 0.6 };
                        for (s, r) in samples.iter_mut().zip(&refs[b].samples) {
                            *s += c * r;
                        }
                    }
                    let extra = noise(1000, 8000, case * 91 + a as u64 + 1);
                    for (s, e) in samples.iter_mut().zip(&extra.samples) {
                        *s += 0.05 * e;
                    }
                    Waveform::new(samples, 8000).unwrap()
                })
                .collect(),
        )
        .unwrap();

        let parts = bss_eval_decompose(&refs, &ests, filter_len).unwrap();
        let scores = bss_eval(&refs, &ests, filter_len).unwrap();
        for (p, s) in parts.iter().zip(&scores) {
            let total = p.target_energy + p.interference_energy + p.artifact_energy;
            worst_identity =
                worst_identity.max((total - p.estimate_energy).abs() / p.estimate_energy);
            ordering_holds &= s.sir >= s.sdr;
        }
    }

    // Orthonormal references mixed as est = ref + 0.1*other: the
    // interference carries 1% of the target energy, which is 20 dB.
    let mut r1 = noise(2000, 8000, 71).samples;
    mean_center(&mut r1);
    let mut r2 = noise(2000, 8000, 72).samples;
    mean_center(&mut r2);
    orthogonalize(&mut r2, &r1);
    let (g1, g2) = (energy(&r1).sqrt(), energy(&r2).sqrt());
    let r1: Vec<f64> = r1.iter().map(|v| v / g1).collect();
    let r2: Vec<f64> = r2.iter().map(|v| v / g2).collect();
    let mix = |a: &[f64], b: &[f64]| {
        Waveform::new(a.iter().zip(b).map(|(x, y)| x + 0.1 * y).collect(), 8000).unwrap()
    };
    let refs = SourceSet::new(vec![
        Waveform::new(r1.clone(), 8000).unwrap(),
        Waveform::new(r2.clone(), 8000).unwrap(),
    ])
    .unwrap();
    let ests = SourceSet::new(vec![mix(&r1, &r2), mix(&r2, &r1)]).unwrap();
    let scores = bss_eval(&refs, &ests, 1).unwrap();

    let ok = worst_identity <= 1e-6
        && ordering_holds
        && scores.iter().all(|s| (s.sir - 20.0).abs() <= 0.1);
    conclude(
        "7 (BSS-eval decomposition)",
        ok,
        &format!(
            "worst energy identity error {worst_identity:.2e}, SIR >= SDR on 100 cases, \
             known mixing SIR {:.3}/{:.3} dB",
            scores[0].sir, scores[1].sir
        ),
    );
}

// ---------------------------------------------------------------------------
// Pipeline criteria exercise the installed binary end to end.

fn run_pipeline(root: &Path, extra: &[&str]) -> std::process::Output {
    let mut args: Vec<String> = [
        "--storage_dir",
        &root.join("storage").to_string_lossy(),
        "--exp_dir",
        &root.join("exp").to_string_lossy(),
        "--data_dir",
        &root.join("data").to_string_lossy(),
        "--logs_dir",
        &root.join("logs").to_string_lossy(),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    args.extend(extra.iter().map(|s| s.to_string()));
    Command::new(env!("CARGO_BIN_EXE_sepkit"))
        .args(&args)
        .output()
        .expect("pipeline binary should spawn")
}

fn mean_metric(exp_dir: &Path, metric: &str) -> (f64, usize) {
    let text = std::fs::read_to_string(exp_dir.join("final_metrics.jsonl")).unwrap();
    let values: Vec<f64> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str::<MetricRecord>(l).unwrap())
        .filter(|r| r.metric == metric)
        .map(|r| r.value)
        .collect();
    (values.iter().sum::<f64>() / values.len() as f64, values.len())
}

#[test]
fn criterion_8_oracle_recipe_clears_the_score_floors() {
    let tmp = tempfile::tempdir().unwrap();

    // Default configuration: 200 utterances split 160/20/20, ratio masks.
    let irm_root = tmp.path().join("irm");
    let started = Instant::now();
    let out = run_pipeline(&irm_root, &[]);
    let elapsed = started.elapsed();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (irm_gain, irm_count) = mean_metric(&irm_root.join("exp"), "si_sdr_i");

    // Band-disjoint steady tones, binary masks.
    let ibm_root = tmp.path().join("ibm");
    let out = run_pipeline(
        &ibm_root,
        &["--data.source_profile", "two_tone", "--separation.method", "oracle:ibm"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (ibm_gain, ibm_count) = mean_metric(&ibm_root.join("exp"), "si_sdr_i");

    let ok = irm_count == 40
        && ibm_count == 40
        && irm_gain >= 10.0
        && ibm_gain >= 30.0
        && elapsed < Duration::from_secs(60);
    conclude(
        "8 (oracle recipe end to end)",
        ok,
        &format!(
            "ratio-mask gain {irm_gain:.2} dB (floor 10), binary-mask gain {ibm_gain:.2} dB \
             (floor 30), wall clock {elapsed:.2?}"
        ),
    );
}

#[test]
fn criterion_9_identical_runs_produce_identical_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = run_pipeline(&tmp.path().join("a"), &[]);
    assert!(out_a.status.success(), "{}", String::from_utf8_lossy(&out_a.stderr));
    let out_b = run_pipeline(&tmp.path().join("b"), &[]);
    assert!(out_b.status.success(), "{}", String::from_utf8_lossy(&out_b.stderr));

    let bytes_a = std::fs::read(tmp.path().join("a/exp/final_metrics.jsonl")).unwrap();
    let bytes_b = std::fs::read(tmp.path().join("b/exp/final_metrics.jsonl")).unwrap();
    conclude(
        "9 (end-to-end determinism)",
        !bytes_a.is_empty() && bytes_a == bytes_b,
        &format!("{} report bytes identical across independent runs", bytes_a.len()),
    );
}

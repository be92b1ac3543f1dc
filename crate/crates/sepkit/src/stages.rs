//! The staged recipe: generate data, gather manifests, separate, and
//! evaluate. Stages communicate only through files, so any stage can be
//! rerun in isolation against earlier outputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sepkit_core::filterbank::Filterbank;
use sepkit_core::masking::{oracle_masks, oracle_separate, OracleMaskKind};
use sepkit_core::phase::{griffin_lim, misi, PhaseReconConfig};
use sepkit_core::signal::{make_mixture, SourceSet, Waveform};
use sepkit_core::transform::{apply_mask, encode, polar};

use crate::config::RecipeConfig;
use crate::manifest::{read_manifest, write_manifest, ManifestRecord};
use crate::synth::{draw_utterance, utterance_seed};
use crate::wav::{read_wav, write_wav, WavEncoding};

pub const SPLITS: [&str; 3] = ["train", "dev", "test"];

/// Per-utterance generation metadata stored next to the WAVs, which
/// stage 2 gathers into the manifests.
#[derive(Debug, Serialize, Deserialize)]
struct UtteranceMeta {
    utt_id: String,
    seed: u64,
    snr_db: Vec<f64>,
    noise_snr_db: Option<f64>,
    n_samples: usize,
}

/// Stage 0: nothing to download; the corpus is synthesized locally.
pub fn stage0_provenance(cfg: &RecipeConfig) {
    println!("stage 0: corpus is synthesized locally, nothing to download");
    println!(
        "stage 0: {} utterances of {} s at {} Hz will be generated under {}",
        cfg.data.n_utterances,
        cfg.data.utterance_seconds,
        cfg.data.sample_rate_hz,
        cfg.storage_dir.display()
    );
}

fn utterance_dir(cfg: &RecipeConfig, split: &str, utt_id: &str) -> PathBuf {
    cfg.storage_dir.join(split).join(utt_id)
}

/// Stage 1: synthesize sources, mix at drawn SNRs, write WAV trees.
pub fn stage1_generate(cfg: &RecipeConfig) -> Result<()> {
    if cfg.data.n_sources < 2 {
        bail!("generation needs at least 2 sources");
    }
    for (split, count) in cfg.split_sizes() {
        for i in 0..count {
            let utt_id = format!("{split}_{i:04}");
            let utt_seed = utterance_seed(cfg.seed, &utt_id);
            let draw = draw_utterance(
                &cfg.data,
                cfg.noise.enabled,
                cfg.noise.snr_range_db,
                utt_seed,
            )?;
            let (mut mixture, rescaled) = make_mixture(
                &draw.sources,
                &draw.snr_db,
                draw.noise.as_ref(),
                draw.noise_snr_db,
            )?;
            let mut sources = rescaled.sources().to_vec();
            normalize_peak(&mut mixture, &mut sources);
            let dir = utterance_dir(cfg, &split, &utt_id);
            fs::create_dir_all(&dir)?;
            write_wav(&mixture, &dir.join("mixture.wav"), WavEncoding::Int16)?;
            for (j, source) in sources.iter().enumerate() {
                write_wav(source, &dir.join(format!("s{}.wav", j + 1)), WavEncoding::Int16)?;
            }
            let meta = UtteranceMeta {
                utt_id: utt_id.clone(),
                seed: utt_seed,
                snr_db: draw.snr_db,
                noise_snr_db: draw.noise_snr_db,
                n_samples: mixture.len(),
            };
            fs::write(dir.join("meta.json"), serde_json::to_string(&meta)?)
                .with_context(|| format!("cannot write metadata for {utt_id}"))?;
        }
        println!("stage 1: wrote {count} {split} utterances");
    }
    Ok(())
}

/// Peak level the int16 files are normalized to when an utterance would
/// otherwise clip.
const PEAK_LIMIT: f64 = 0.9;

/// Scales the mixture and all sources by one common factor when any of
/// them would clip the int16 range. A shared gain keeps the mixture equal
/// to the sum of its sources and leaves every power ratio (hence every
/// SNR) untouched.
fn normalize_peak(mixture: &mut Waveform, sources: &mut [Waveform]) {
    let peak = sources
        .iter()
        .flat_map(|s| s.samples.iter())
        .chain(mixture.samples.iter())
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    if peak > PEAK_LIMIT {
        let gain = PEAK_LIMIT / peak;
        for v in &mut mixture.samples {
            *v *= gain;
        }
        for s in sources.iter_mut() {
            for v in &mut s.samples {
                *v *= gain;
            }
        }
    }
}

/// Stage 2: validate the generated WAVs and gather them into manifests.
pub fn stage2_manifest(cfg: &RecipeConfig) -> Result<()> {
    for (split, _) in cfg.split_sizes() {
        let split_dir = cfg.storage_dir.join(&split);
        let mut utt_dirs: Vec<PathBuf> = fs::read_dir(&split_dir)
            .with_context(|| {
                format!("cannot list {}; run stage 1 first", split_dir.display())
            })?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_dir())
            .collect();
        utt_dirs.sort();
        let mut records = Vec::with_capacity(utt_dirs.len());
        let mut problems = Vec::new();
        for dir in utt_dirs {
            match gather_utterance(cfg, &dir) {
                Ok(record) => records.push(record),
                Err(e) => problems.push(format!("{}: {e:#}", dir.display())),
            }
        }
        if !problems.is_empty() {
            bail!(
                "{} {split} utterances failed validation:\n{}",
                problems.len(),
                problems.join("\n")
            );
        }
        let path = cfg.data_dir.join(format!("{split}.jsonl"));
        write_manifest(&records, &path)?;
        println!("stage 2: {} -> {} records", path.display(), records.len());
    }
    Ok(())
}

fn gather_utterance(cfg: &RecipeConfig, dir: &Path) -> Result<ManifestRecord> {
    let meta: UtteranceMeta = serde_json::from_str(
        &fs::read_to_string(dir.join("meta.json")).context("missing metadata")?,
    )
    .context("corrupt metadata")?;
    let mixture_path = dir.join("mixture.wav");
    let mixture = read_wav(&mixture_path)?;
    if mixture.sample_rate_hz != cfg.data.sample_rate_hz {
        bail!(
            "mixture sample rate {} does not match the configured {}",
            mixture.sample_rate_hz,
            cfg.data.sample_rate_hz
        );
    }
    if mixture.len() != meta.n_samples {
        bail!("mixture has {} samples, metadata promised {}", mixture.len(), meta.n_samples);
    }
    let mut sources = Vec::with_capacity(cfg.data.n_sources);
    for j in 1..=cfg.data.n_sources {
        let path = dir.join(format!("s{j}.wav"));
        let source = read_wav(&path)?;
        if source.len() != mixture.len() {
            bail!(
                "{} has {} samples, mixture has {}",
                path.display(),
                source.len(),
                mixture.len()
            );
        }
        sources.push(path);
    }
    Ok(ManifestRecord {
        utt_id: meta.utt_id,
        mixture: mixture_path,
        sources,
        n_samples: meta.n_samples,
        snr_db: meta.snr_db,
        seed: meta.seed,
    })
}

/// Stage 3: separate every test utterance with the configured method and
/// write float32 estimates under the experiment directory.
pub fn stage3_separate(cfg: &RecipeConfig) -> Result<usize> {
    let manifest_path = cfg.data_dir.join("test.jsonl");
    let records = read_manifest(&manifest_path)
        .with_context(|| "missing test manifest; run stage 2 first".to_string())?;
    let fb = cfg.filterbank.build(cfg.data.sample_rate_hz, cfg.seed)?;
    fs::create_dir_all(&cfg.logs_dir)?;
    let log_path = cfg.logs_dir.join("stage3.log");
    let mut log_lines = Vec::new();
    let mut failures = 0usize;
    for record in &records {
        match separate_utterance(cfg, &fb, record) {
            Ok(estimates) => {
                let dir = cfg.exp_dir.join("estimates").join(&record.utt_id);
                fs::create_dir_all(&dir)?;
                for (j, est) in estimates.iter().enumerate() {
                    write_wav(est, &dir.join(format!("s{}.wav", j + 1)), WavEncoding::Float32)?;
                }
            }
            Err(e) => {
                failures += 1;
                log_lines.push(format!("{}: {e:#}", record.utt_id));
            }
        }
    }
    fs::write(&log_path, log_lines.join("\n") + "\n")?;
    if failures > 0 {
        println!(
            "stage 3: {failures} of {} utterances failed, see {}",
            records.len(),
            log_path.display()
        );
    } else {
        println!("stage 3: separated {} utterances", records.len());
    }
    Ok(failures)
}

fn load_utterance(record: &ManifestRecord) -> Result<(Waveform, SourceSet)> {
    let mixture = read_wav(&record.mixture)?;
    let sources = record
        .sources
        .iter()
        .map(|p| read_wav(p))
        .collect::<Result<Vec<_>>>()?;
    Ok((mixture, SourceSet::new(sources)?))
}

fn separate_utterance(
    cfg: &RecipeConfig,
    fb: &Filterbank,
    record: &ManifestRecord,
) -> Result<SourceSet> {
    let (mixture, truth) = load_utterance(record)?;
    match cfg.separation.method.as_str() {
        "oracle:ibm" | "oracle:irm" => {
            let kind = cfg.separation.mask_kind().expect("checked by the match");
            oracle_separate(&mixture, &truth, fb, kind).map_err(Into::into)
        }
        "misi" => {
            let mags: Vec<_> = truth
                .iter()
                .map(|s| encode(fb, s).map(|rep| polar(&rep).0))
                .collect::<Result<_, _>>()?;
            let phase_cfg =
                PhaseReconConfig { n_iters: cfg.separation.n_iters, ..PhaseReconConfig::for_misi() };
            Ok(misi(&mixture, &mags, fb, &phase_cfg)?.estimates)
        }
        "griffin_lim_oracle" => {
            let mix_rep = encode(fb, &mixture)?;
            let truth_reps: Vec<_> =
                truth.iter().map(|s| encode(fb, s)).collect::<Result<_, _>>()?;
            let masks = oracle_masks(&truth_reps, OracleMaskKind::Irm)?;
            let phase_cfg = PhaseReconConfig {
                n_iters: cfg.separation.n_iters,
                ..PhaseReconConfig::default()
            };
            let estimates = masks
                .iter()
                .map(|mask| {
                    let masked = apply_mask(&mix_rep, mask)?;
                    let (mag, _) = polar(&masked);
                    let (est, _) =
                        griffin_lim(&mag, fb, mixture.sample_rate_hz, &phase_cfg)?;
                    // Phase recovery cannot know the original length; the
                    // implied length is never shorter, so crop.
                    Waveform::new(est.samples[..mixture.len()].to_vec(), est.sample_rate_hz)
                })
                .collect::<Result<Vec<_>, _>>()?;
            SourceSet::new(estimates).map_err(Into::into)
        }
        other => bail!("unknown separation method '{other}'"),
    }
}

/// Stage 4: score the estimates against the manifest and write reports.
pub fn stage4_evaluate(cfg: &RecipeConfig) -> Result<crate::evalset::EvalReport> {
    let manifest_path = cfg.data_dir.join("test.jsonl");
    let estimates_dir = cfg.exp_dir.join("estimates");
    if !estimates_dir.is_dir() {
        bail!(
            "no estimates under {}; run stage 3 first",
            estimates_dir.display()
        );
    }
    let report = crate::evalset::evaluate_set(
        &manifest_path,
        &estimates_dir,
        &cfg.evaluation.metrics,
        cfg.evaluation.filter_len,
    )?;
    crate::evalset::write_reports(&report, &cfg.exp_dir)?;
    print!("{}", crate::evalset::aggregate_table(&report));
    Ok(report)
}

//! Batch evaluation: permutation-aligned metrics over a manifest, with
//! line-delimited and human-readable reports.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};
use sepkit_core::metrics::{bss_eval, si_sdr, si_sdr_improvement, BssEvalScores, DB_CAP};
use sepkit_core::pit::{
    pairwise_matrix, pit_from_matrix, AssignmentAlgorithm, PairwiseLossKind, ReduceFn,
};
use sepkit_core::signal::SourceSet;

use crate::manifest::read_manifest;
use crate::wav::read_wav;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricRecord {
    pub utt_id: String,
    pub source_index: usize,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct EvalReport {
    /// One capped value per (utterance, source, requested metric).
    pub records: Vec<MetricRecord>,
    /// Best permutation per scored utterance: entry r is the estimate
    /// index matched to reference slot r.
    pub permutations: Vec<(String, Vec<usize>)>,
    /// Utterances that could not be scored, with the reason.
    pub skipped: Vec<(String, String)>,
    pub n_scored: usize,
    /// (metric, mean over every scored value), in requested order.
    pub aggregates: Vec<(String, f64)>,
}

/// Scores every manifest utterance whose estimates are present under
/// `estimates_dir/{utt_id}/s{j}.wav`. Estimates are aligned to the
/// references by the permutation maximizing mean scale-invariant SDR;
/// that one alignment is reused for every requested metric. Failures are
/// recorded per utterance and do not stop the run.
pub fn evaluate_set(
    manifest: &Path,
    estimates_dir: &Path,
    metrics: &[String],
    filter_len: usize,
) -> Result<EvalReport> {
    let entries = read_manifest(manifest)?;
    let mut report = EvalReport::default();
    for entry in &entries {
        match score_utterance(entry, estimates_dir, metrics, filter_len) {
            Ok((records, permutation)) => {
                report.records.extend(records);
                report.permutations.push((entry.utt_id.clone(), permutation));
                report.n_scored += 1;
            }
            Err(e) => report.skipped.push((entry.utt_id.clone(), format!("{e:#}"))),
        }
    }
    for metric in metrics {
        let values: Vec<f64> = report
            .records
            .iter()
            .filter(|r| &r.metric == metric)
            .map(|r| r.value)
            .collect();
        if !values.is_empty() {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            report.aggregates.push((metric.clone(), mean));
        }
    }
    Ok(report)
}

fn cap(value: f64) -> f64 {
    value.clamp(-DB_CAP, DB_CAP)
}

fn score_utterance(
    entry: &crate::manifest::ManifestRecord,
    estimates_dir: &Path,
    metrics: &[String],
    filter_len: usize,
) -> Result<(Vec<MetricRecord>, Vec<usize>)> {
    let mixture = read_wav(&entry.mixture)?;
    let refs = SourceSet::new(
        entry.sources.iter().map(|p| read_wav(p)).collect::<Result<Vec<_>>>()?,
    )?;
    let n_src = refs.n_sources();
    let ests = SourceSet::new(
        (1..=n_src)
            .map(|j| {
                let path = estimates_dir.join(&entry.utt_id).join(format!("s{j}.wav"));
                read_wav(&path)
            })
            .collect::<Result<Vec<_>>>()?,
    )?;
    if ests.n_samples() != refs.n_samples() {
        return Err(anyhow!(
            "estimates have {} samples, references {}",
            ests.n_samples(),
            refs.n_samples()
        ));
    }

    let matrix = pairwise_matrix(PairwiseLossKind::NegSiSdr, &ests, &refs)?;
    let algorithm = if n_src <= 10 {
        AssignmentAlgorithm::Exhaustive
    } else {
        AssignmentAlgorithm::Hungarian
    };
    let (_, best) = pit_from_matrix(&matrix, ReduceFn::Mean, algorithm)?;
    let aligned = SourceSet::new(
        (0..n_src).map(|r| ests[best.estimate_for(r)].clone()).collect(),
    )?;

    let needs_bss = metrics.iter().any(|m| matches!(m.as_str(), "sdr" | "sir" | "sar"));
    let bss: Option<Vec<BssEvalScores>> =
        if needs_bss { Some(bss_eval(&refs, &aligned, filter_len)?) } else { None };

    let mut records = Vec::with_capacity(n_src * metrics.len());
    for r in 0..n_src {
        for metric in metrics {
            let value = match metric.as_str() {
                "si_sdr" => si_sdr(&aligned[r], &refs[r])?,
                "si_sdr_i" => si_sdr_improvement(&aligned[r], &refs[r], &mixture)?,
                "sdr" => bss.as_ref().expect("requested above")[r].sdr,
                "sir" => bss.as_ref().expect("requested above")[r].sir,
                "sar" => bss.as_ref().expect("requested above")[r].sar,
                other => return Err(anyhow!("unknown metric '{other}'")),
            };
            records.push(MetricRecord {
                utt_id: entry.utt_id.clone(),
                source_index: r,
                metric: metric.clone(),
                value: cap(value),
            });
        }
    }
    Ok((records, best.as_slice().to_vec()))
}

/// Writes `final_metrics.jsonl` (one record per line) and
/// `final_metrics.txt` (the aggregate table) under `exp_dir`.
pub fn write_reports(report: &EvalReport, exp_dir: &Path) -> Result<()> {
    fs::create_dir_all(exp_dir)?;
    let mut jsonl = String::new();
    for r in &report.records {
        jsonl.push_str(&serde_json::to_string(r)?);
        jsonl.push('\n');
    }
    let path = exp_dir.join("final_metrics.jsonl");
    fs::write(&path, jsonl).with_context(|| format!("cannot write {}", path.display()))?;
    fs::write(exp_dir.join("final_metrics.txt"), aggregate_table(report))?;
    Ok(())
}

pub fn aggregate_table(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "scored {} utterances ({} skipped)\n",
        report.n_scored,
        report.skipped.len()
    ));
    for (metric, mean) in &report.aggregates {
        out.push_str(&format!("{metric:>10}  {mean:8.3} dB mean\n"));
    }
    for (utt, reason) in &report.skipped {
        out.push_str(&format!("skipped {utt}: {reason}\n"));
    }
    out
}

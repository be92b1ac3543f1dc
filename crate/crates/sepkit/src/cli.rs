//! Command-line entry point: flag parsing, config resolution, and the
//! stage loop.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use crate::config::RecipeConfig;
use crate::stages;

pub const MIN_STAGE: u32 = 0;
pub const MAX_STAGE: u32 = 4;

#[derive(Debug, PartialEq)]
pub struct CliArgs {
    pub stage: u32,
    pub stop_stage: u32,
    pub conf: Option<PathBuf>,
    pub overrides: Vec<(String, String)>,
}

/// Parses `--stage N --stop-stage M --conf path` plus dotted config
/// overrides (`--section.key value` or `--key value`).
pub fn parse_args(args: &[String]) -> Result<CliArgs> {
    let mut stage = 1u32;
    let mut stop_stage = MAX_STAGE;
    let mut conf = None;
    let mut overrides = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(name) = arg.strip_prefix("--") else {
            bail!("unexpected argument '{arg}'; flags look like --stage, --conf, --section.key");
        };
        let value = it
            .next()
            .with_context(|| format!("flag --{name} needs a value"))?;
        match name {
            "stage" => stage = parse_stage(value)?,
            "stop-stage" | "stop_stage" => stop_stage = parse_stage(value)?,
            "conf" => conf = Some(PathBuf::from(value)),
            _ => overrides.push((name.to_string(), value.clone())),
        }
    }
    if stop_stage < stage {
        bail!("--stop-stage {stop_stage} is before --stage {stage}");
    }
    Ok(CliArgs { stage, stop_stage, conf, overrides })
}

fn parse_stage(value: &str) -> Result<u32> {
    let n: i64 = value
        .parse()
        .with_context(|| format!("stage '{value}' is not an integer"))?;
    if !(MIN_STAGE as i64..=MAX_STAGE as i64).contains(&n) {
        bail!("stage must be in {MIN_STAGE}..{MAX_STAGE}");
    }
    Ok(n as u32)
}

/// Runs the requested stage range under the resolved config.
pub fn run(args: &[String]) -> Result<()> {
    let parsed = parse_args(args)?;
    let cfg = RecipeConfig::load(parsed.conf.as_deref(), &parsed.overrides)?;
    // Every invocation snapshots the configuration it actually ran with,
    // so any run is reproducible from exp_dir alone.
    fs::create_dir_all(&cfg.exp_dir)?;
    fs::write(cfg.exp_dir.join("conf_resolved.yml"), cfg.resolved_yaml()?)
        .context("cannot write resolved config")?;
    for stage in parsed.stage..=parsed.stop_stage {
        match stage {
            0 => stages::stage0_provenance(&cfg),
            1 => stages::stage1_generate(&cfg).context("stage 1 (generate) failed")?,
            2 => stages::stage2_manifest(&cfg).context("stage 2 (manifest) failed")?,
            3 => {
                stages::stage3_separate(&cfg).context("stage 3 (separate) failed")?;
            }
            4 => {
                stages::stage4_evaluate(&cfg).context("stage 4 (evaluate) failed")?;
            }
            _ => unreachable!("range checked at parse time"),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strs(args: &[&str]) -> Vec<String> {
        args.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn defaults_cover_the_full_range() {
        let parsed = parse_args(&[]).unwrap();
        assert_eq!(parsed.stage, 1);
        assert_eq!(parsed.stop_stage, 4);
        assert!(parsed.conf.is_none());
        assert!(parsed.overrides.is_empty());
    }

    #[test]
    fn stage_window_and_overrides_parse() {
        let parsed = parse_args(&strs(&[
            "--stage",
            "3",
            "--stop-stage",
            "4",
            "--separation.method",
            "oracle:ibm",
        ]))
        .unwrap();
        assert_eq!(parsed.stage, 3);
        assert_eq!(parsed.stop_stage, 4);
        assert_eq!(
            parsed.overrides,
            vec![("separation.method".to_string(), "oracle:ibm".to_string())]
        );
    }

    #[test]
    fn out_of_range_stages_are_refused_with_the_documented_message() {
        let err = format!("{:#}", parse_args(&strs(&["--stage", "5"])).unwrap_err());
        assert!(err.contains("stage must be in 0..4"), "{err}");
        let err = format!("{:#}", parse_args(&strs(&["--stop-stage", "-1"])).unwrap_err());
        assert!(err.contains("stage must be in 0..4"), "{err}");
    }

    #[test]
    fn inverted_stage_windows_are_refused() {
        assert!(parse_args(&strs(&["--stage", "3", "--stop-stage", "2"])).is_err());
    }

    #[test]
    fn missing_values_and_stray_positionals_are_refused() {
        assert!(parse_args(&strs(&["--stage"])).is_err());
        assert!(parse_args(&strs(&["run"])).is_err());
    }
}

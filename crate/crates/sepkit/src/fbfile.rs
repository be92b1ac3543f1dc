//! Textual filterbank export/import for inspection and debugging.
//!
//! Layout: a `header` line with shape and kind, an optional `window`
//! line, then one row of coefficients per filter. Floats are printed
//! with enough digits to round-trip exactly.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use sepkit_core::filterbank::{Filterbank, FilterbankKind};

pub fn export_filterbank(fb: &Filterbank, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "header n_filters={} kernel_size={} stride={} kind={}\n",
        fb.n_filters(),
        fb.kernel_size(),
        fb.stride(),
        fb.kind().name()
    ));
    if let Some(window) = fb.window() {
        out.push_str("window");
        for v in window {
            out.push_str(&format!(" {v:.17e}"));
        }
        out.push('\n');
    }
    for row in 0..fb.n_filters() {
        let mut line = String::new();
        for (i, v) in fb.filter(row).iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{v:.17e}"));
        }
        out.push_str(&line);
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

pub fn import_filterbank(path: &Path) -> Result<Filterbank> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read filterbank file {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    let mut n_filters = None;
    let mut kernel_size = None;
    let mut stride = None;
    let mut kind = None;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("header") {
        bail!("first line must be the header");
    }
    for field in fields {
        let (key, value) = field
            .split_once('=')
            .with_context(|| format!("malformed header field '{field}'"))?;
        match key {
            "n_filters" => n_filters = Some(value.parse::<usize>()?),
            "kernel_size" => kernel_size = Some(value.parse::<usize>()?),
            "stride" => stride = Some(value.parse::<usize>()?),
            "kind" => kind = Some(FilterbankKind::from_name(value)?),
            other => bail!("unknown header field '{other}'"),
        }
    }
    let (Some(n_filters), Some(kernel_size), Some(stride), Some(kind)) =
        (n_filters, kernel_size, stride, kind)
    else {
        bail!("header must carry n_filters, kernel_size, stride, and kind");
    };

    let mut window = None;
    let mut rows: Vec<f64> = Vec::with_capacity(n_filters * kernel_size);
    for line in lines {
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("window ") {
            let values = parse_row(rest)?;
            if values.len() != kernel_size {
                bail!("window has {} taps, expected {kernel_size}", values.len());
            }
            window = Some(values);
            continue;
        }
        let row = parse_row(line)?;
        if row.len() != kernel_size {
            bail!("row {} has {} coefficients, expected {kernel_size}", rows.len() / kernel_size, row.len());
        }
        rows.extend(row);
    }
    if rows.len() != n_filters * kernel_size {
        bail!("found {} rows, header promised {n_filters}", rows.len() / kernel_size);
    }
    Filterbank::from_raw(rows, kernel_size, stride, kind, window).map_err(Into::into)
}

fn parse_row(line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| tok.parse::<f64>().with_context(|| format!("bad float '{tok}'")))
        .collect()
}

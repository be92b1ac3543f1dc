//! Minimal RIFF/WAVE I/O: mono, 16-bit integer or 32-bit float samples.
//!
//! Readers accept any chunk ordering and skip unknown chunks; writers
//! emit a canonical fmt/data layout (float files also carry the fact
//! chunk some tools insist on).

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use sepkit_core::signal::Waveform;

/// Stored sample layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Int16,
    Float32,
}

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;

/// Reads a mono WAV file. 16-bit samples are scaled to [-1, 1) by
/// dividing by 32768; 32-bit float samples pass through unchanged.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let bytes = fs::read(path)
        .with_context(|| format!("missing or unreadable WAV file {}", path.display()))?;
    parse_wav(&bytes).with_context(|| format!("while reading {}", path.display()))
}

fn parse_wav(bytes: &[u8]) -> Result<Waveform> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        bail!("not a RIFF/WAVE file");
    }
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_end = pos + 8 + size;
        if body_end > bytes.len() {
            bail!("truncated chunk {:?}", String::from_utf8_lossy(id));
        }
        let body = &bytes[pos + 8..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    bail!("fmt chunk too short");
                }
                fmt = Some((
                    u16::from_le_bytes(body[0..2].try_into().unwrap()),
                    u16::from_le_bytes(body[2..4].try_into().unwrap()),
                    u32::from_le_bytes(body[4..8].try_into().unwrap()),
                    u16::from_le_bytes(body[14..16].try_into().unwrap()),
                ));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned; odd sizes carry a pad byte.
        pos = body_end + size % 2;
    }
    let (format_tag, channels, sample_rate, bits) =
        fmt.ok_or_else(|| anyhow!("missing fmt chunk"))?;
    let data = data.ok_or_else(|| anyhow!("missing data chunk"))?;
    if channels != 1 {
        bail!("multi-channel unsupported ({channels} channels)");
    }
    let samples = match (format_tag, bits) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes(c.try_into().unwrap()) as f64 / 32768.0)
            .collect(),
        (FORMAT_IEEE_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        _ => bail!("unsupported encoding (format tag {format_tag}, {bits} bits)"),
    };
    Waveform::new(samples, sample_rate).map_err(Into::into)
}

/// Writes a mono WAV file. Int16 mode clips to [-1, 1 - 2^-15] before
/// quantizing; float32 mode stores samples as-is in single precision.
pub fn write_wav(w: &Waveform, path: &Path, encoding: WavEncoding) -> Result<()> {
    if w.samples.iter().any(|v| !v.is_finite()) {
        bail!("refusing to write non-finite samples");
    }
    let mut payload = Vec::new();
    match encoding {
        WavEncoding::Int16 => {
            for &v in &w.samples {
                let q = (v.clamp(-1.0, 1.0 - 1.0 / 32768.0) * 32768.0).round() as i32;
                payload.extend_from_slice(&(q.clamp(-32768, 32767) as i16).to_le_bytes());
            }
        }
        WavEncoding::Float32 => {
            for &v in &w.samples {
                payload.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    let bytes = assemble(w.sample_rate_hz, encoding, &payload);
    write_atomically(path, &bytes)
        .with_context(|| format!("cannot write WAV file {}", path.display()))
}

fn assemble(sample_rate_hz: u32, encoding: WavEncoding, payload: &[u8]) -> Vec<u8> {
    let (format_tag, bits): (u16, u16) = match encoding {
        WavEncoding::Int16 => (FORMAT_PCM, 16),
        WavEncoding::Float32 => (FORMAT_IEEE_FLOAT, 32),
    };
    let block_align = bits / 8;
    let byte_rate = sample_rate_hz * block_align as u32;
    let fact = matches!(encoding, WavEncoding::Float32);
    let riff_size = 4 + (8 + 16) + if fact { 8 + 4 } else { 0 } + 8 + payload.len();

    let mut out = Vec::with_capacity(8 + riff_size);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(riff_size as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format_tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&(block_align).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    if fact {
        out.extend_from_slice(b"fact");
        out.extend_from_slice(&4u32.to_le_bytes());
        out.extend_from_slice(&((payload.len() / block_align as usize) as u32).to_le_bytes());
    }
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload);
    out
}

/// Writes through a sibling temp file and renames, so readers never see a
/// half-written file and reruns stay byte-deterministic.
fn write_atomically(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

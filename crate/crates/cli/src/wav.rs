//! Strict RIFF/WAVE reader and writer: PCM, 16-bit, mono, 16 kHz only.

use std::path::Path;

use maskfusion::dsp::Waveform;
use maskfusion::{Error, SAMPLE_RATE};

use crate::error::{CliError, CliResult};
use crate::fsio;

const PCM: u16 = 1;
const SCALE: f64 = 32768.0;

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: message.into(),
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

/// Decodes a WAV image; errors carry the byte offset of the offending field.
pub fn decode_wav(b: &[u8]) -> maskfusion::Result<Waveform> {
    if b.len() < 12 {
        return Err(format_err(b.len(), "file too short for a RIFF header"));
    }
    if &b[0..4] != b"RIFF" {
        return Err(format_err(0, "missing RIFF tag"));
    }
    if &b[8..12] != b"WAVE" {
        return Err(format_err(8, "missing WAVE tag"));
    }
    let mut pos = 12;
    let mut fmt_seen = false;
    while pos + 8 <= b.len() {
        let id = &b[pos..pos + 4];
        let size = u32_at(b, pos + 4) as usize;
        let body = pos + 8;
        if body + size > b.len() {
            return Err(format_err(
                pos + 4,
                format!(
                    "chunk {:?} claims {size} bytes, only {} remain",
                    String::from_utf8_lossy(id),
                    b.len() - body
                ),
            ));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(format_err(
                        pos + 4,
                        format!("fmt chunk is {size} bytes, need 16"),
                    ));
                }
                let tag = u16_at(b, body);
                if tag != PCM {
                    return Err(format_err(body, format!("format tag {tag} is not PCM (1)")));
                }
                let channels = u16_at(b, body + 2);
                if channels != 1 {
                    return Err(format_err(
                        body + 2,
                        format!("{channels} channels, only mono (1) is supported"),
                    ));
                }
                let rate = u32_at(b, body + 4);
                if rate != SAMPLE_RATE {
                    return Err(format_err(
                        body + 4,
                        format!("sample rate {rate} Hz, expected {SAMPLE_RATE} Hz; resample first"),
                    ));
                }
                let bits = u16_at(b, body + 14);
                if bits != 16 {
                    return Err(format_err(
                        body + 14,
                        format!("{bits} bits per sample, only 16 is supported"),
                    ));
                }
                let align = u16_at(b, body + 12);
                if align != 2 {
                    return Err(format_err(
                        body + 12,
                        format!("block align {align}, expected 2"),
                    ));
                }
                fmt_seen = true;
            }
            b"data" => {
                if !fmt_seen {
                    return Err(format_err(pos, "data chunk precedes fmt chunk"));
                }
                if !size.is_multiple_of(2) {
                    return Err(format_err(
                        pos + 4,
                        format!("data size {size} is not a whole number of samples"),
                    ));
                }
                let samples = b[body..body + size]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / SCALE)
                    .collect();
                return Waveform::new(samples, SAMPLE_RATE);
            }
            _ => {}
        }
        // chunks are padded to even length
        pos = body + size + (size & 1);
    }
    Err(format_err(
        pos.min(b.len()),
        if fmt_seen {
            "no data chunk"
        } else {
            "no fmt chunk"
        },
    ))
}

/// Round to nearest, clip to the 16-bit range.
pub fn quantize(x: f64) -> i16 {
    (x * SCALE).round().clamp(-32768.0, 32767.0) as i16
}

pub fn encode_wav(w: &Waveform) -> maskfusion::Result<Vec<u8>> {
    if w.sample_rate() != SAMPLE_RATE {
        return Err(Error::InvalidArgument(format!(
            "cannot write {} Hz audio, only {SAMPLE_RATE} Hz is supported",
            w.sample_rate()
        )));
    }
    let data_len = w.len() * 2;
    if data_len > (u32::MAX as usize) - 36 {
        return Err(Error::InvalidArgument(
            "waveform too long for a WAV file".into(),
        ));
    }
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&SAMPLE_RATE.to_le_bytes());
    out.extend_from_slice(&(SAMPLE_RATE * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &x in w.samples() {
        out.extend_from_slice(&quantize(x).to_le_bytes());
    }
    Ok(out)
}

pub fn read_wav(path: &Path) -> CliResult<Waveform> {
    let bytes = fsio::read_bytes(path)?;
    decode_wav(&bytes).map_err(|e| CliError::from(e).in_file(path))
}

pub fn write_wav(path: &Path, w: &Waveform) -> CliResult<()> {
    fsio::write_atomic(path, &encode_wav(w)?)
}

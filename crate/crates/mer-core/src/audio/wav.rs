//! Minimal RIFF/WAVE reader and writer for 16-bit PCM.
//!
//! Mono and stereo files are accepted; stereo is averaged down to mono.
//! Unknown chunks are skipped. The writer exists for fixtures and round-trip
//! tests and always emits mono 16-bit PCM.

use std::path::Path;

use super::AudioClip;
use crate::error::{Error, Result};

fn u16_at(bytes: &[u8], off: usize) -> Result<u16> {
    bytes
        .get(off..off + 2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .ok_or_else(|| Error::InvalidInput("wav: truncated header".into()))
}

fn u32_at(bytes: &[u8], off: usize) -> Result<u32> {
    bytes
        .get(off..off + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::InvalidInput("wav: truncated header".into()))
}

/// Decodes a 16-bit PCM RIFF/WAVE byte buffer.
pub fn read_wav_bytes(bytes: &[u8]) -> Result<AudioClip> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::InvalidInput("wav: not a RIFF/WAVE file".into()));
    }
    let mut off = 12;
    let mut fmt: Option<(u16, u32, u16)> = None; // channels, rate, bits
    let mut data: Option<&[u8]> = None;
    while off + 8 <= bytes.len() {
        let id = &bytes[off..off + 4];
        let size = u32_at(bytes, off + 4)? as usize;
        let body_start = off + 8;
        let body_end = body_start + size;
        if body_end > bytes.len() {
            return Err(Error::InvalidInput("wav: chunk overruns file".into()));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::InvalidInput("wav: fmt chunk too small".into()));
                }
                let audio_format = u16_at(bytes, body_start)?;
                if audio_format != 1 {
                    return Err(Error::InvalidInput(format!(
                        "wav: unsupported audio format {audio_format}, only PCM"
                    )));
                }
                let channels = u16_at(bytes, body_start + 2)?;
                let rate = u32_at(bytes, body_start + 4)?;
                let bits = u16_at(bytes, body_start + 14)?;
                fmt = Some((channels, rate, bits));
            }
            b"data" => data = Some(&bytes[body_start..body_end]),
            _ => {}
        }
        off = body_end + (size & 1); // chunks are word-aligned
    }
    let (channels, rate, bits) =
        fmt.ok_or_else(|| Error::InvalidInput("wav: missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::InvalidInput("wav: missing data chunk".into()))?;
    if bits != 16 {
        return Err(Error::InvalidInput(format!(
            "wav: unsupported bit depth {bits}, only 16-bit PCM"
        )));
    }
    if channels == 0 || channels > 2 {
        return Err(Error::InvalidInput(format!(
            "wav: unsupported channel count {channels}"
        )));
    }
    if rate == 0 {
        return Err(Error::InvalidInput("wav: zero sample rate".into()));
    }
    let ch = channels as usize;
    let frame_bytes = 2 * ch;
    let frames = data.len() / frame_bytes;
    let mut samples = Vec::with_capacity(frames);
    for f in 0..frames {
        let mut acc = 0.0;
        for c in 0..ch {
            let o = f * frame_bytes + 2 * c;
            let v = i16::from_le_bytes([data[o], data[o + 1]]);
            acc += v as f64 / 32768.0;
        }
        samples.push(acc / ch as f64);
    }
    Ok(AudioClip {
        samples,
        sample_rate: rate,
    })
}

pub fn read_wav(path: &Path) -> Result<AudioClip> {
    read_wav_bytes(&std::fs::read(path)?)
}

/// Encodes mono 16-bit PCM. Samples are clamped to [-1, 1].
pub fn write_wav_mono16(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let data_len = samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, out)?;
    Ok(())
}

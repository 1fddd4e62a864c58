//! RIFF/WAVE, 16-bit PCM, mono.

use std::fs;
use std::path::Path;

use crate::dsp::Waveform;
use crate::{Error, Result};

const PCM: u16 = 1;

/// Encodes samples as 16-bit PCM, saturating at full scale.
pub fn encode_wav(w: &Waveform) -> Vec<u8> {
    let data_len = (w.samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&w.sample_rate.to_le_bytes());
    out.extend_from_slice(&(w.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in &w.samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

pub fn decode_wav(bytes: &[u8]) -> Result<Waveform> {
    let malformed = |m: &str| Error::MalformedHeader(format!("wav: {m}"));
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE signature"));
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body = pos + 8;
        if id == b"fmt " {
            if len < 16 || body + 16 > bytes.len() {
                return Err(malformed("truncated fmt chunk"));
            }
            let b = &bytes[body..body + 16];
            let u16_at = |i: usize| u16::from_le_bytes([b[i], b[i + 1]]);
            fmt = Some((
                u16_at(0),
                u16_at(2),
                u32::from_le_bytes(b[4..8].try_into().unwrap()),
                u16_at(14),
            ));
        } else if id == b"data" {
            let (format, channels, rate, bits) = fmt.ok_or_else(|| malformed("data chunk before fmt chunk"))?;
            if format != PCM {
                return Err(Error::UnsupportedEncoding(format!("format tag {format}, only PCM (1) is supported")));
            }
            if bits != 16 {
                return Err(Error::UnsupportedEncoding(format!("{bits}-bit samples, only 16-bit is supported")));
            }
            if channels != 1 {
                return Err(Error::MultiChannel(channels));
            }
            if body + len > bytes.len() {
                return Err(malformed("truncated data chunk"));
            }
            let samples = bytes[body..body + len]
                .chunks_exact(2)
                .map(|c| f64::from(i16::from_le_bytes([c[0], c[1]])) / 32768.0)
                .collect();
            return Waveform::new(samples, rate).map_err(|e| malformed(&e.to_string()));
        }
        // chunks are word aligned
        pos = body + len + (len & 1);
    }
    Err(malformed("no data chunk"))
}

pub fn save_wav(w: &Waveform, path: &Path) -> Result<()> {
    fs::write(path, encode_wav(w)).map_err(|e| Error::io(path, e))
}

pub fn load_wav(path: &Path) -> Result<Waveform> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

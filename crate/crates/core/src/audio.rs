//! RIFF/WAVE decoding and band-limited resampling.
//!
//! Only 16-bit integer PCM with one or two channels is accepted; that covers
//! the three corpora the toolkit knows about. Stereo input is averaged down
//! to mono and samples are scaled by 1/32768 so the most negative code maps
//! exactly onto -1.0.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

/// Working sample rate for feature extraction.
pub const WORKING_RATE_HZ: u32 = 22_050;

const PCM16_SCALE: f64 = 32768.0;
const FORMAT_PCM: u16 = 1;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Decoded mono audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate_hz: u32,
    source_path: String,
}

impl AudioClip {
    /// Builds a clip, checking that it is nonempty, in range and has a
    /// positive rate.
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32, source_path: impl Into<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Format("clip has no samples".into()));
        }
        if sample_rate_hz == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if let Some(bad) = samples.iter().find(|s| !(-1.0..=1.0).contains(*s)) {
            return Err(Error::Format(format!("sample {bad} outside [-1, 1]")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            source_path: source_path.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }

    pub(crate) fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source_path = source.into();
        self
    }
}

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct FmtChunk {
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk> {
    if body.len() < 16 {
        return Err(Error::Format(format!("fmt chunk too short ({} bytes)", body.len())));
    }
    let mut tag = read_u16(body, 0);
    let channels = read_u16(body, 2);
    let sample_rate = read_u32(body, 4);
    let bits_per_sample = read_u16(body, 14);
    if tag == FORMAT_EXTENSIBLE {
        if body.len() < 26 {
            return Err(Error::Format("truncated WAVE_FORMAT_EXTENSIBLE fmt chunk".into()));
        }
        // First two bytes of the sub-format GUID carry the real format tag.
        tag = read_u16(body, 24);
    }
    if tag != FORMAT_PCM {
        return Err(Error::Unsupported(format!("format tag {tag:#06x} is not integer PCM")));
    }
    if bits_per_sample != 16 {
        return Err(Error::Unsupported(format!("{bits_per_sample}-bit samples")));
    }
    if !(1..=2).contains(&channels) {
        return Err(Error::Unsupported(format!("{channels} channels")));
    }
    if sample_rate == 0 {
        return Err(Error::Format("fmt chunk declares a zero sample rate".into()));
    }
    Ok(FmtChunk {
        channels,
        sample_rate,
        bits_per_sample,
    })
}

/// Decodes a RIFF/WAVE byte buffer holding 16-bit PCM.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Format("missing RIFF/WAVE header".into()));
    }
    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .ok_or_else(|| Error::Format("chunk size overflow".into()))?;
        if body_end > bytes.len() {
            let name = String::from_utf8_lossy(id).into_owned();
            return Err(Error::Format(format!(
                "chunk '{name}' declares {size} bytes but only {} remain",
                bytes.len() - body_start
            )));
        }
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => fmt = Some(parse_fmt(body)?),
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word aligned.
        pos = body_end + (size & 1);
    }
    let fmt = fmt.ok_or_else(|| Error::Format("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::Format("no data chunk".into()))?;

    let frame_bytes = usize::from(fmt.channels) * usize::from(fmt.bits_per_sample / 8);
    if data.len() % frame_bytes != 0 {
        return Err(Error::Format(format!(
            "data chunk of {} bytes is not a whole number of {frame_bytes}-byte frames",
            data.len()
        )));
    }
    let samples: Vec<f64> = data
        .chunks_exact(frame_bytes)
        .map(|frame| {
            let sum: f64 = frame
                .chunks_exact(2)
                .map(|s| f64::from(i16::from_le_bytes([s[0], s[1]])) / PCM16_SCALE)
                .sum();
            sum / f64::from(fmt.channels)
        })
        .collect();
    AudioClip::new(samples, fmt.sample_rate, "")
}

/// Reads and decodes a WAV file from disk.
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_wav(&bytes)?.with_source(path.display().to_string()))
}

/// Encodes a mono clip as a canonical 44-byte-header PCM16 WAV.
///
/// Samples are quantized by `round(x * 32768)` saturated to the i16 range.
pub fn encode_wav_pcm16(samples: &[f64], sample_rate_hz: u32) -> Vec<u8> {
    let data_len = samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in samples {
        let q = (s * PCM16_SCALE).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

/// Taps of the interpolation kernel, counted at the lower of the two rates.
const RESAMPLE_TAPS: usize = 64;
const KAISER_BETA: f64 = 8.6;

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        let r = half / k as f64;
        term *= r * r;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Output length `round(len * target / source)` in exact integer arithmetic.
pub fn resampled_len(len: usize, source_hz: u32, target_hz: u32) -> usize {
    let num = len as u128 * u128::from(target_hz);
    let den = u128::from(source_hz);
    ((2 * num + den) / (2 * den)) as usize
}

/// Band-limited resampling with a Kaiser-windowed sinc kernel.
///
/// The cutoff sits at the lower Nyquist frequency. Equal rates return the
/// input untouched.
pub fn resample(clip: &AudioClip, target_rate_hz: u32) -> Result<AudioClip> {
    if target_rate_hz == 0 {
        return Err(Error::Config("target rate must be positive".into()));
    }
    let source = clip.sample_rate_hz();
    if source == target_rate_hz {
        return Ok(clip.clone());
    }
    let input = clip.samples();
    let out_len = resampled_len(input.len(), source, target_rate_hz).max(1);
    let step = f64::from(source) / f64::from(target_rate_hz);
    // Relative cutoff in input-sample units.
    let cutoff = (f64::from(target_rate_hz) / f64::from(source)).min(1.0);
    let half_width = (RESAMPLE_TAPS / 2) as f64 / cutoff;
    let norm = bessel_i0(KAISER_BETA);

    let n = input.len() as isize;
    let out: Vec<f64> = (0..out_len)
        .map(|i| {
            let t = i as f64 * step;
            let lo = (t - half_width).ceil() as isize;
            let hi = (t + half_width).floor() as isize;
            let mut acc = 0.0;
            for j in lo.max(0)..=hi.min(n - 1) {
                let d = t - j as f64;
                let r = d / half_width;
                let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / norm;
                acc += input[j as usize] * cutoff * sinc(cutoff * d) * w;
            }
            acc.clamp(-1.0, 1.0)
        })
        .collect();
    AudioClip::new(out, target_rate_hz, clip.source_path())
}

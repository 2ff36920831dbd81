//! STFT power spectra, Slaney-scale Mel filterbanks, dB Mel-spectrograms and
//! MFCCs, all shaped to a fixed frame count for the classifier input.
//!
//! Defaults follow the usual audio-analysis toolkit conventions: 2048-point
//! periodic Hann window, hop 512, reflect-padded centered frames, power
//! spectra, reference 1.0 / floor 1e-10 / 80 dB dynamic range, orthonormal
//! DCT-II for the cepstrum.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::audio::{self, AudioClip};
use crate::dsp::{Dct, Matrix, Radix2Fft};
use crate::error::{Error, Result};

pub const MEL_BANDS: usize = 128;
pub const MFCC_COEFFS: usize = 40;
pub const TARGET_FRAMES: usize = 174;

pub const AMIN: f64 = 1e-10;
pub const TOP_DB: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureKind {
    MelSpectrogramDb,
    Mfcc,
}

impl FeatureKind {
    pub fn label(self) -> &'static str {
        match self {
            FeatureKind::MelSpectrogramDb => "Mel",
            FeatureKind::Mfcc => "MFCC",
        }
    }

    /// Band count used by the standard extraction settings.
    pub fn bands(self) -> usize {
        match self {
            FeatureKind::MelSpectrogramDb => MEL_BANDS,
            FeatureKind::Mfcc => MFCC_COEFFS,
        }
    }

    fn tag(self) -> u8 {
        match self {
            FeatureKind::MelSpectrogramDb => 0,
            FeatureKind::Mfcc => 1,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(FeatureKind::MelSpectrogramDb),
            1 => Some(FeatureKind::Mfcc),
            _ => None,
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mel" | "melspectrogram" | "mel-spectrogram" | "melspectrogramdb" => Ok(FeatureKind::MelSpectrogramDb),
            "mfcc" => Ok(FeatureKind::Mfcc),
            other => Err(Error::Config(format!(
                "unknown feature kind '{other}' (expected mfcc or mel)"
            ))),
        }
    }
}

/// A bands x frames feature matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Vec<f32>,
    kind: FeatureKind,
    bands: usize,
    frames: usize,
    clip_id: String,
}

impl FeatureMatrix {
    pub fn new(
        values: Vec<f32>,
        kind: FeatureKind,
        bands: usize,
        frames: usize,
        clip_id: impl Into<String>,
    ) -> Result<Self> {
        if values.len() != bands * frames {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {bands}x{frames} feature matrix",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerics("feature matrix contains non-finite values".into()));
        }
        Ok(Self {
            values,
            kind,
            bands,
            frames,
            clip_id: clip_id.into(),
        })
    }

    fn from_matrix(m: &Matrix, kind: FeatureKind, clip_id: &str) -> Result<Self> {
        let values = m.data().iter().map(|&v| v as f32).collect();
        Self::new(values, kind, m.rows(), m.cols(), clip_id)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn clip_id(&self) -> &str {
        &self.clip_id
    }

    pub fn get(&self, band: usize, frame: usize) -> f32 {
        self.values[band * self.frames + frame]
    }

    pub fn with_clip_id(mut self, id: impl Into<String>) -> Self {
        self.clip_id = id.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Window {
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop_len: usize,
    pub window: Window,
    pub center_pad: bool,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_len: 2048,
            hop_len: 512,
            window: Window::Hann,
            center_pad: true,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.window_len.is_power_of_two() {
            return Err(Error::Config(format!(
                "window length {} is not a power of two",
                self.window_len
            )));
        }
        if self.hop_len == 0 || self.hop_len > self.window_len {
            return Err(Error::Config(format!(
                "hop length {} must be in 1..={}",
                self.hop_len, self.window_len
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    /// Frame count produced for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if self.center_pad {
            1 + len / self.hop_len
        } else if len < self.window_len {
            1
        } else {
            1 + (len - self.window_len) / self.hop_len
        }
    }

    fn window_coeffs(&self) -> Vec<f64> {
        let n = self.window_len as f64;
        match self.window {
            // Periodic Hann, as used for spectral analysis.
            Window::Hann => (0..self.window_len)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n).cos())
                .collect(),
        }
    }
}

/// Index into a signal of length `len` under whole-sample symmetric
/// reflection (`... x2 x1 | x0 x1 x2 ... | x_{n-2} ...`), repeated as needed.
fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Power spectrogram, `(window_len/2 + 1) x frames`.
pub fn stft_power(clip: &AudioClip, cfg: &StftConfig) -> Result<Matrix> {
    cfg.validate()?;
    power_spectrogram(clip.samples(), cfg)
}

pub(crate) fn power_spectrogram(samples: &[f64], cfg: &StftConfig) -> Result<Matrix> {
    cfg.validate()?;
    let n_fft = cfg.window_len;
    let frames = cfg.frame_count(samples.len());
    let window = cfg.window_coeffs();
    let fft = Radix2Fft::new(n_fft);
    let offset = if cfg.center_pad { -((n_fft / 2) as isize) } else { 0 };
    let mut out = Matrix::zeros(cfg.n_bins(), frames);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for f in 0..frames {
        let start = offset + (f * cfg.hop_len) as isize;
        for (i, (b, w)) in buf.iter_mut().zip(&window).enumerate() {
            let pos = start + i as isize;
            let x = if cfg.center_pad {
                samples[reflect_index(pos, samples.len())]
            } else {
                samples.get(pos as usize).copied().unwrap_or(0.0)
            };
            *b = Complex64::new(x * w, 0.0);
        }
        fft.forward(&mut buf);
        for (k, v) in buf.iter().take(cfg.n_bins()).enumerate() {
            out.set(k, f, v.norm_sqr());
        }
    }
    Ok(out)
}

const SLANEY_F_SP: f64 = 200.0 / 3.0;
const SLANEY_MIN_LOG_HZ: f64 = 1000.0;
const SLANEY_MIN_LOG_MEL: f64 = SLANEY_MIN_LOG_HZ / SLANEY_F_SP;

fn slaney_logstep() -> f64 {
    6.4f64.ln() / 27.0
}

/// Slaney mel scale: linear (3f/200) below 1 kHz, logarithmic above.
pub fn hz_to_mel(hz: f64) -> f64 {
    if hz >= SLANEY_MIN_LOG_HZ {
        SLANEY_MIN_LOG_MEL + (hz / SLANEY_MIN_LOG_HZ).ln() / slaney_logstep()
    } else {
        hz / SLANEY_F_SP
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel >= SLANEY_MIN_LOG_MEL {
        SLANEY_MIN_LOG_HZ * (slaney_logstep() * (mel - SLANEY_MIN_LOG_MEL)).exp()
    } else {
        mel * SLANEY_F_SP
    }
}

/// Frequencies (Hz) of the `n_mels + 2` filter edge/center points.
pub fn mel_points(n_mels: usize, fmin_hz: f64, fmax_hz: f64) -> Vec<f64> {
    let lo = hz_to_mel(fmin_hz);
    let hi = hz_to_mel(fmax_hz);
    let steps = (n_mels + 1) as f64;
    (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / steps))
        .collect()
}

/// Area-normalized triangular filterbank, `n_mels x (n_fft/2 + 1)`.
pub fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate_hz: u32, fmin_hz: f64, fmax_hz: f64) -> Result<Matrix> {
    let nyquist = f64::from(sample_rate_hz) / 2.0;
    if n_mels == 0 {
        return Err(Error::Config("filterbank needs at least one band".into()));
    }
    if n_fft < 2 {
        return Err(Error::Config(format!("FFT size {n_fft} too small")));
    }
    if !(fmin_hz >= 0.0 && fmin_hz < fmax_hz && fmax_hz <= nyquist) {
        return Err(Error::Config(format!(
            "filterbank range must satisfy 0 <= fmin < fmax <= {nyquist}, got [{fmin_hz}, {fmax_hz}]"
        )));
    }
    let n_bins = n_fft / 2 + 1;
    let bin_hz: Vec<f64> = (0..n_bins).map(|k| k as f64 * nyquist / (n_bins - 1) as f64).collect();
    let pts = mel_points(n_mels, fmin_hz, fmax_hz);
    let mut fb = Matrix::zeros(n_mels, n_bins);
    for i in 0..n_mels {
        let (lower, center, upper) = (pts[i], pts[i + 1], pts[i + 2]);
        let enorm = 2.0 / (upper - lower);
        let row = fb.row_mut(i);
        for (w, &f) in row.iter_mut().zip(&bin_hz) {
            let rising = (f - lower) / (center - lower);
            let falling = (upper - f) / (upper - center);
            *w = rising.min(falling).max(0.0) * enorm;
        }
        if row.iter().all(|&w| w == 0.0) {
            return Err(Error::Config(format!(
                "mel band {i} ({lower:.1}-{upper:.1} Hz) covers no FFT bin; \
                 {n_mels} bands is too many for a {n_fft}-point FFT"
            )));
        }
    }
    Ok(fb)
}

/// `10 log10(max(x, amin))` clamped to `[max - top_db, max]`.
pub fn power_to_db(power: &Matrix, top_db: f64) -> Matrix {
    let mut data: Vec<f64> = power.data().iter().map(|&x| 10.0 * x.max(AMIN).log10()).collect();
    let peak = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = peak - top_db;
    data.iter_mut().for_each(|v| *v = v.max(floor));
    Matrix::from_vec(power.rows(), power.cols(), data)
}

/// dB Mel-spectrogram with a filterbank spanning 0 Hz to Nyquist.
pub fn mel_spectrogram_db(clip: &AudioClip, cfg: &StftConfig, n_mels: usize) -> Result<FeatureMatrix> {
    let fb = mel_filterbank(
        n_mels,
        cfg.window_len,
        clip.sample_rate_hz(),
        0.0,
        f64::from(clip.sample_rate_hz()) / 2.0,
    )?;
    let db = mel_db_matrix(clip.samples(), cfg, &fb)?;
    FeatureMatrix::from_matrix(&db, FeatureKind::MelSpectrogramDb, clip.source_path())
}

fn mel_db_matrix(samples: &[f64], cfg: &StftConfig, fb: &Matrix) -> Result<Matrix> {
    let power = power_spectrogram(samples, cfg)?;
    Ok(power_to_db(&fb.matmul(&power), TOP_DB))
}

fn cepstrum(mel_db: &Matrix, dct: &Dct, n_mfcc: usize) -> Matrix {
    let mut out = Matrix::zeros(n_mfcc, mel_db.cols());
    for f in 0..mel_db.cols() {
        let coeffs = dct.forward(&mel_db.column(f));
        for (k, &c) in coeffs.iter().take(n_mfcc).enumerate() {
            out.set(k, f, c);
        }
    }
    out
}

/// MFCCs: orthonormal DCT-II over the bands of the dB Mel-spectrogram.
pub fn mfcc(clip: &AudioClip, cfg: &StftConfig, n_mfcc: usize, n_mels: usize) -> Result<FeatureMatrix> {
    if n_mfcc == 0 || n_mfcc > n_mels {
        return Err(Error::Config(format!("n_mfcc = {n_mfcc} must be in 1..={n_mels}")));
    }
    let fb = mel_filterbank(
        n_mels,
        cfg.window_len,
        clip.sample_rate_hz(),
        0.0,
        f64::from(clip.sample_rate_hz()) / 2.0,
    )?;
    let db = mel_db_matrix(clip.samples(), cfg, &fb)?;
    let m = cepstrum(&db, &Dct::new(n_mels), n_mfcc);
    FeatureMatrix::from_matrix(&m, FeatureKind::Mfcc, clip.source_path())
}

/// Truncates or right-pads to exactly `target_frames` columns.
///
/// MFCC matrices pad with zeros; dB Mel matrices pad with their own minimum,
/// which is the clamp floor whenever the clip spans the full dynamic range.
pub fn shape_to_frames(m: &FeatureMatrix, target_frames: usize) -> Result<FeatureMatrix> {
    if target_frames == 0 {
        return Err(Error::Config("target frame count must be at least 1".into()));
    }
    if m.frames == target_frames {
        return Ok(m.clone());
    }
    let pad = match m.kind {
        FeatureKind::Mfcc => 0.0,
        FeatureKind::MelSpectrogramDb => m.values.iter().copied().fold(f32::INFINITY, f32::min),
    };
    let keep = m.frames.min(target_frames);
    let mut values = Vec::with_capacity(m.bands * target_frames);
    for b in 0..m.bands {
        let row = &m.values[b * m.frames..(b + 1) * m.frames];
        values.extend_from_slice(&row[..keep]);
        values.extend(std::iter::repeat_n(pad, target_frames - keep));
    }
    FeatureMatrix::new(values, m.kind, m.bands, target_frames, m.clip_id.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub stft: StftConfig,
    pub sample_rate_hz: u32,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub target_frames: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            sample_rate_hz: audio::WORKING_RATE_HZ,
            n_mels: MEL_BANDS,
            n_mfcc: MFCC_COEFFS,
            target_frames: TARGET_FRAMES,
        }
    }
}

impl FeatureConfig {
    pub fn bands_for(&self, kind: FeatureKind) -> usize {
        match kind {
            FeatureKind::MelSpectrogramDb => self.n_mels,
            FeatureKind::Mfcc => self.n_mfcc,
        }
    }
}

/// Extraction pipeline with the filterbank and DCT built once and shared.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    filterbank: Matrix,
    dct: Dct,
}

impl FeatureExtractor {
    pub fn new(cfg: FeatureConfig) -> Result<Self> {
        cfg.stft.validate()?;
        if cfg.n_mfcc == 0 || cfg.n_mfcc > cfg.n_mels {
            return Err(Error::Config(format!(
                "n_mfcc = {} must be in 1..={}",
                cfg.n_mfcc, cfg.n_mels
            )));
        }
        let filterbank = mel_filterbank(
            cfg.n_mels,
            cfg.stft.window_len,
            cfg.sample_rate_hz,
            0.0,
            f64::from(cfg.sample_rate_hz) / 2.0,
        )?;
        let dct = Dct::new(cfg.n_mels);
        Ok(Self { cfg, filterbank, dct })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &Matrix {
        &self.filterbank
    }

    /// Unshaped dB Mel-spectrogram of a clip already at the working rate.
    pub fn mel_db(&self, clip: &AudioClip) -> Result<Matrix> {
        self.check_rate(clip)?;
        mel_db_matrix(clip.samples(), &self.cfg.stft, &self.filterbank)
    }

    fn check_rate(&self, clip: &AudioClip) -> Result<()> {
        if clip.sample_rate_hz() != self.cfg.sample_rate_hz {
            return Err(Error::Config(format!(
                "clip at {} Hz given to an extractor configured for {} Hz",
                clip.sample_rate_hz(),
                self.cfg.sample_rate_hz
            )));
        }
        Ok(())
    }

    /// Unshaped feature matrix of a clip already at the working rate.
    pub fn raw(&self, clip: &AudioClip, kind: FeatureKind) -> Result<FeatureMatrix> {
        let db = self.mel_db(clip)?;
        let m = match kind {
            FeatureKind::MelSpectrogramDb => db,
            FeatureKind::Mfcc => cepstrum(&db, &self.dct, self.cfg.n_mfcc),
        };
        FeatureMatrix::from_matrix(&m, kind, clip.source_path())
    }

    /// Resamples to the working rate, extracts, and shapes to the target
    /// frame count.
    pub fn extract(&self, clip: &AudioClip, kind: FeatureKind) -> Result<FeatureMatrix> {
        let clip = audio::resample(clip, self.cfg.sample_rate_hz)?;
        shape_to_frames(&self.raw(&clip, kind)?, self.cfg.target_frames)
    }
}

/// Z-scores every matrix with the mean and standard deviation of `reference`.
pub fn standardize(reference: &[FeatureMatrix], targets: &mut [FeatureMatrix]) {
    let count: usize = reference.iter().map(|m| m.values.len()).sum();
    if count == 0 {
        return;
    }
    let mean = reference
        .iter()
        .flat_map(|m| &m.values)
        .map(|&v| f64::from(v))
        .sum::<f64>()
        / count as f64;
    let var = reference
        .iter()
        .flat_map(|m| &m.values)
        .map(|&v| (f64::from(v) - mean).powi(2))
        .sum::<f64>()
        / count as f64;
    let std = var.sqrt().max(1e-12);
    for m in targets {
        m.values
            .iter_mut()
            .for_each(|v| *v = ((f64::from(*v) - mean) / std) as f32);
    }
}

pub const CACHE_DATA_FILE: &str = "features.bin";
pub const CACHE_INDEX_FILE: &str = "features.index.json";

/// Writes feature records plus a JSON index of byte offsets into `dir`.
///
/// Record layout (little-endian): `u32` id length, UTF-8 id, `u8` kind
/// (0 Mel dB, 1 MFCC), `u32` bands, `u32` frames, then `bands * frames`
/// row-major `f32` values.
pub fn write_feature_cache(dir: &Path, features: &[FeatureMatrix]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let data_path = dir.join(CACHE_DATA_FILE);
    let file = File::create(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let mut w = BufWriter::new(file);
    let mut index = BTreeMap::new();
    let mut offset: u64 = 0;
    for m in features {
        if index.insert(m.clip_id.clone(), offset).is_some() {
            return Err(Error::Config(format!(
                "duplicate clip id '{}' in feature cache",
                m.clip_id
            )));
        }
        let id = m.clip_id.as_bytes();
        let mut rec = Vec::with_capacity(13 + id.len() + 4 * m.values.len());
        rec.extend_from_slice(&(id.len() as u32).to_le_bytes());
        rec.extend_from_slice(id);
        rec.push(m.kind.tag());
        rec.extend_from_slice(&(m.bands as u32).to_le_bytes());
        rec.extend_from_slice(&(m.frames as u32).to_le_bytes());
        for v in &m.values {
            rec.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&rec).map_err(|e| Error::io(&data_path, e))?;
        offset += rec.len() as u64;
    }
    w.flush().map_err(|e| Error::io(&data_path, e))?;
    let index_path = dir.join(CACHE_INDEX_FILE);
    let json = serde_json::to_vec_pretty(&index)?;
    std::fs::write(&index_path, json).map_err(|e| Error::io(&index_path, e))
}

/// Random-access reader over a cache written by [`write_feature_cache`].
pub struct FeatureCache {
    data_path: PathBuf,
    index: BTreeMap<String, u64>,
}

impl FeatureCache {
    pub fn open(dir: &Path) -> Result<Self> {
        let index_path = dir.join(CACHE_INDEX_FILE);
        let raw = std::fs::read(&index_path).map_err(|e| Error::io(&index_path, e))?;
        let index = serde_json::from_slice(&raw)?;
        Ok(Self {
            data_path: dir.join(CACHE_DATA_FILE),
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, clip_id: &str) -> bool {
        self.index.contains_key(clip_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    pub fn get(&self, clip_id: &str) -> Result<FeatureMatrix> {
        let offset = *self
            .index
            .get(clip_id)
            .ok_or_else(|| Error::Config(format!("clip '{clip_id}' not in feature cache")))?;
        let file = File::open(&self.data_path).map_err(|e| Error::io(&self.data_path, e))?;
        let mut r = BufReader::new(file);
        r.seek(SeekFrom::Start(offset))
            .map_err(|e| Error::io(&self.data_path, e))?;
        read_record(&mut r).map_err(|e| match e {
            Error::Io { source, .. } => Error::Format(format!("corrupt feature cache record: {source}")),
            other => other,
        })
    }

    /// Loads every record in index order.
    pub fn load_all(&self) -> Result<Vec<FeatureMatrix>> {
        self.index.keys().map(|id| self.get(id)).collect()
    }
}

fn read_record(r: &mut impl Read) -> Result<FeatureMatrix> {
    let io = |e| Error::io("feature cache", e);
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(io)?;
    let mut id = vec![0u8; u32::from_le_bytes(u32buf) as usize];
    r.read_exact(&mut id).map_err(io)?;
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind).map_err(io)?;
    r.read_exact(&mut u32buf).map_err(io)?;
    let bands = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u32buf).map_err(io)?;
    let frames = u32::from_le_bytes(u32buf) as usize;
    let mut raw = vec![0u8; 4 * bands * frames];
    r.read_exact(&mut raw).map_err(io)?;
    let values = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let kind =
        FeatureKind::from_tag(kind[0]).ok_or_else(|| Error::Format(format!("unknown feature kind tag {}", kind[0])))?;
    let id = String::from_utf8(id).map_err(|_| Error::Format("clip id is not UTF-8".into()))?;
    FeatureMatrix::new(values, kind, bands, frames, id)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, rate: u32, len: usize, amp: f64) -> AudioClip {
        let s = (0..len)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / f64::from(rate)).sin())
            .collect();
        AudioClip::new(s, rate, "tone").unwrap()
    }

    #[test]
    fn slaney_scale_anchor_points() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        assert!((hz_to_mel(1000.0) - 15.0).abs() < 1e-12);
        assert!((hz_to_mel(500.0) - 7.5).abs() < 1e-12);
        for hz in [0.0, 200.0, 999.0, 1000.0, 4000.0, 11025.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
    }

    #[test]
    fn frame_arithmetic() {
        let cfg = StftConfig::default();
        assert_eq!(cfg.frame_count(22_050), 44);
        let nc = StftConfig {
            center_pad: false,
            ..cfg
        };
        assert_eq!(nc.frame_count(2048), 1);
        assert_eq!(nc.frame_count(100), 1);
        assert_eq!(nc.frame_count(2048 + 512), 2);
    }

    #[test]
    fn config_validation() {
        let bad = StftConfig {
            window_len: 1000,
            ..StftConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad_hop = StftConfig {
            hop_len: 4096,
            ..StftConfig::default()
        };
        assert!(bad_hop.validate().is_err());
    }

    #[test]
    fn reflect_padding_indices() {
        // x = [a b c d]; reflect: ... c b | a b c d | c b a ...
        let idx: Vec<usize> = (-3..7).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(idx, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
        assert_eq!(reflect_index(-5, 1), 0);
    }

    #[test]
    fn zero_signal_power_is_zero_and_db_constant() {
        let clip = AudioClip::new(vec![0.0; 5000], 22_050, "z").unwrap();
        let p = stft_power(&clip, &StftConfig::default()).unwrap();
        assert!(p.data().iter().all(|&v| v == 0.0));
        let mel = mel_spectrogram_db(&clip, &StftConfig::default(), 128).unwrap();
        let first = mel.values()[0];
        assert!((f64::from(first) + 100.0).abs() < 1e-4);
        assert!(mel.values().iter().all(|&v| v == first));
        let shaped = shape_to_frames(&mel, 174).unwrap();
        assert!(shaped.values().iter().all(|&v| v == first));
    }

    #[test]
    fn filterbank_shape_and_positivity() {
        let fb = mel_filterbank(128, 2048, 22_050, 0.0, 11_025.0).unwrap();
        assert_eq!((fb.rows(), fb.cols()), (128, 1025));
        for r in 0..128 {
            assert!(fb.row(r).iter().all(|&w| w >= 0.0));
            assert!(fb.row(r).iter().sum::<f64>() > 0.0);
        }
    }

    #[test]
    fn filterbank_support_lies_between_neighbour_centers() {
        let (sr, n_fft, n_mels) = (22_050u32, 2048usize, 128usize);
        let fb = mel_filterbank(n_mels, n_fft, sr, 0.0, 11_025.0).unwrap();
        let pts = mel_points(n_mels, 0.0, 11_025.0);
        for i in 0..n_mels {
            for (k, &w) in fb.row(i).iter().enumerate() {
                if w > 0.0 {
                    let f = k as f64 * f64::from(sr) / n_fft as f64;
                    assert!(f > pts[i] && f < pts[i + 2], "row {i} bin {k}");
                }
            }
        }
    }

    #[test]
    fn degenerate_filterbank_is_config_error() {
        assert!(matches!(
            mel_filterbank(128, 64, 22_050, 0.0, 11_025.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            mel_filterbank(10, 2048, 22_050, 500.0, 400.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            mel_filterbank(10, 2048, 22_050, 0.0, 20_000.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn mel_db_spans_at_most_80_db() {
        let clip = tone(440.0, 22_050, 22_050, 0.5);
        let m = mel_spectrogram_db(&clip, &StftConfig::default(), 128).unwrap();
        let max = m.values().iter().copied().fold(f32::MIN, f32::max);
        let min = m.values().iter().copied().fold(f32::MAX, f32::min);
        assert!(max - min <= 80.0 + 1e-3);
        assert_eq!((m.bands(), m.frames()), (128, 44));
    }

    #[test]
    fn mfcc_shape_and_bad_counts() {
        let clip = tone(300.0, 22_050, 11_025, 0.3);
        let m = mfcc(&clip, &StftConfig::default(), 40, 128).unwrap();
        assert_eq!((m.bands(), m.frames(), m.kind()), (40, 22, FeatureKind::Mfcc));
        assert!(matches!(
            mfcc(&clip, &StftConfig::default(), 129, 128),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn shaping_pads_and_truncates() {
        let vals: Vec<f32> = (0..40 * 100).map(|i| i as f32).collect();
        let m = FeatureMatrix::new(vals, FeatureKind::Mfcc, 40, 100, "c").unwrap();
        let padded = shape_to_frames(&m, 174).unwrap();
        assert_eq!(padded.frames(), 174);
        for b in 0..40 {
            for f in 0..100 {
                assert_eq!(padded.get(b, f), m.get(b, f));
            }
            for f in 100..174 {
                assert_eq!(padded.get(b, f), 0.0);
            }
        }
        let long: Vec<f32> = (0..40 * 200).map(|i| (i % 997) as f32).collect();
        let long = FeatureMatrix::new(long, FeatureKind::Mfcc, 40, 200, "l").unwrap();
        let cut = shape_to_frames(&long, 174).unwrap();
        for b in 0..40 {
            for f in 0..174 {
                assert_eq!(cut.get(b, f), long.get(b, f));
            }
        }
        let same = shape_to_frames(&cut, 174).unwrap();
        assert_eq!(same, cut);
        assert!(shape_to_frames(&cut, 0).is_err());
    }

    #[test]
    fn mel_padding_uses_floor_value() {
        let m = FeatureMatrix::new(
            vec![-10.0, -50.0, -20.0, -30.0],
            FeatureKind::MelSpectrogramDb,
            2,
            2,
            "m",
        )
        .unwrap();
        let p = shape_to_frames(&m, 3).unwrap();
        assert_eq!(p.values(), &[-10.0, -50.0, -50.0, -20.0, -30.0, -50.0]);
    }

    #[test]
    fn extractor_resamples_and_shapes() {
        let ex = FeatureExtractor::new(FeatureConfig::default()).unwrap();
        let clip = tone(500.0, 16_000, 32_000, 0.4);
        let m = ex.extract(&clip, FeatureKind::Mfcc).unwrap();
        assert_eq!((m.bands(), m.frames()), (40, 174));
        let mel = ex.extract(&clip, FeatureKind::MelSpectrogramDb).unwrap();
        assert_eq!((mel.bands(), mel.frames()), (128, 174));
    }

    #[test]
    fn extractor_matches_free_functions() {
        let ex = FeatureExtractor::new(FeatureConfig::default()).unwrap();
        let clip = tone(700.0, 22_050, 8000, 0.2);
        let a = ex.raw(&clip, FeatureKind::Mfcc).unwrap();
        let b = mfcc(&clip, &StftConfig::default(), 40, 128).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn standardize_uses_reference_statistics() {
        let a = FeatureMatrix::new(vec![1.0, 3.0], FeatureKind::Mfcc, 1, 2, "a").unwrap();
        let mut t = vec![a.clone()];
        standardize(&[a], &mut t);
        assert_eq!(t[0].values(), &[-1.0, 1.0]);
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = FeatureMatrix::new(vec![1.5, -2.0, 3.25, 0.0], FeatureKind::Mfcc, 2, 2, "a.wav").unwrap();
        let b = FeatureMatrix::new(vec![-80.0; 6], FeatureKind::MelSpectrogramDb, 3, 2, "dir/b.wav").unwrap();
        write_feature_cache(dir.path(), &[a.clone(), b.clone()]).unwrap();
        let cache = FeatureCache::open(dir.path()).unwrap();
        assert_eq!(cache.len(), 2);
        assert_eq!(cache.get("dir/b.wav").unwrap(), b);
        assert_eq!(cache.get("a.wav").unwrap(), a);
        assert!(cache.get("missing").is_err());
        let index: BTreeMap<String, u64> =
            serde_json::from_slice(&std::fs::read(dir.path().join(CACHE_INDEX_FILE)).unwrap()).unwrap();
        assert_eq!(index["a.wav"], 0);
        assert_eq!(index["dir/b.wav"], (4 + 5 + 1 + 8 + 16) as u64);
    }
}

use wasm_bindgen::prelude::*;

use emoser::agreement::{agreement_report, fleiss_report, parse_ratings, RatingMatrix};
use emoser::audio::{decode_wav, AudioClip, WORKING_RATE_HZ};
use emoser::corpus::Emotion;
use emoser::features::{mel_filterbank, FeatureConfig, FeatureExtractor, FeatureKind, FeatureMatrix};
use emoser::harness::synthetic;
use emoser::{Error, Result};

/// Row-major grid of values with its range, ready to paint.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    rows: usize,
    cols: usize,
    values: Vec<f32>,
    min: f32,
    max: f32,
}

#[wasm_bindgen]
impl Heatmap {
    #[wasm_bindgen(getter)]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[wasm_bindgen(getter)]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[wasm_bindgen(getter)]
    pub fn min(&self) -> f32 {
        self.min
    }

    #[wasm_bindgen(getter)]
    pub fn max(&self) -> f32 {
        self.max
    }

    pub fn values(&self) -> Vec<f32> {
        self.values.clone()
    }

    /// RGBA pixels, one per cell, with row 0 at the bottom of the image.
    pub fn rgba(&self) -> Vec<u8> {
        let span = if self.max > self.min { self.max - self.min } else { 1.0 };
        let mut out = Vec::with_capacity(self.rows * self.cols * 4);
        for r in (0..self.rows).rev() {
            for c in 0..self.cols {
                let t = (self.values[r * self.cols + c] - self.min) / span;
                let [red, green, blue] = colormap(t);
                out.extend_from_slice(&[red, green, blue, 255]);
            }
        }
        out
    }

    /// One row of the grid, e.g. a single Mel band's frequency response.
    #[wasm_bindgen(js_name = rowSlice)]
    pub fn row_slice(&self, row: usize) -> Vec<f32> {
        let row = row.min(self.rows.saturating_sub(1));
        self.values[row * self.cols..(row + 1) * self.cols].to_vec()
    }
}

impl Heatmap {
    pub fn new(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 || values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values do not fill a {rows}x{cols} grid",
                values.len()
            )));
        }
        let (min, max) = values.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        Ok(Self {
            rows,
            cols,
            values,
            min,
            max,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.cols + col]
    }
}

impl From<&FeatureMatrix> for Heatmap {
    fn from(m: &FeatureMatrix) -> Self {
        Heatmap::new(m.bands(), m.frames(), m.values().to_vec()).expect("feature matrices are never empty")
    }
}

// Five viridis stops, linearly interpolated.
const STOPS: [[f32; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

fn colormap(t: f32) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (STOPS.len() - 1) as f32;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f32;
    let mut rgb = [0u8; 3];
    for (k, out) in rgb.iter_mut().enumerate() {
        *out = (STOPS[i][k] + (STOPS[i + 1][k] - STOPS[i][k]) * f).round() as u8;
    }
    rgb
}

pub fn synth_clip(emotion: &str, seconds: f64, seed: u32) -> Result<Vec<f32>> {
    if !(0.05..=10.0).contains(&seconds) {
        return Err(Error::Config(format!("clip length {seconds} s outside 0.05..10")));
    }
    let class = emotion.parse::<Emotion>()?.index();
    let clip = synthetic::clip(class, 0, u64::from(seed), seconds, WORKING_RATE_HZ)?;
    Ok(clip.samples().iter().map(|&v| v as f32).collect())
}

fn features(clip: &AudioClip, kind: &str) -> Result<Heatmap> {
    let kind: FeatureKind = kind.parse()?;
    let extractor = FeatureExtractor::new(FeatureConfig::default())?;
    Ok(Heatmap::from(&extractor.extract(clip, kind)?))
}

pub fn features_from_samples(samples: &[f32], rate_hz: u32, kind: &str) -> Result<Heatmap> {
    let clip = AudioClip::new(samples.iter().map(|&v| f64::from(v)).collect(), rate_hz, "browser")?;
    features(&clip, kind)
}

pub fn features_from_wav(bytes: &[u8], kind: &str) -> Result<Heatmap> {
    features(&decode_wav(bytes)?, kind)
}

/// Mel filter weights, one row per band, one column per FFT bin.
pub fn filterbank(n_mels: usize, n_fft: usize, rate_hz: u32) -> Result<Heatmap> {
    let fb = mel_filterbank(n_mels, n_fft, rate_hz, 0.0, f64::from(rate_hz) / 2.0)?;
    Heatmap::new(fb.rows(), fb.cols(), fb.data().iter().map(|&v| v as f32).collect())
}

/// A text starting with `recording_id` is read as judge ratings and gets
/// the full three-way report; anything else is a table of per-category
/// counts, one subject per line, separated by commas or whitespace.
pub fn kappa(text: &str) -> Result<String> {
    let json = if text.trim_start().starts_with("recording_id") {
        let sets = parse_ratings(text.as_bytes())?;
        serde_json::to_string_pretty(&agreement_report(&sets)?)
    } else {
        let rows = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        t.parse::<u32>()
                            .map_err(|_| Error::Rating(format!("'{t}' is not a count")))
                    })
                    .collect::<Result<Vec<u32>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        serde_json::to_string_pretty(&fleiss_report(&RatingMatrix::new(&rows)?)?)
    };
    Ok(json?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colormap_endpoints() {
        assert_eq!(colormap(0.0), [68, 1, 84]);
        assert_eq!(colormap(1.0), [253, 231, 37]);
        assert_eq!(colormap(f32::NAN), [68, 1, 84]);
    }

    #[test]
    fn rgba_flips_rows() {
        let h = Heatmap::new(2, 1, vec![0.0, 1.0]).unwrap();
        let px = h.rgba();
        assert_eq!(&px[..4], &[253, 231, 37, 255]);
        assert_eq!(&px[4..], &[68, 1, 84, 255]);
    }

    #[test]
    fn heatmap_rejects_ragged_grid() {
        assert!(Heatmap::new(2, 2, vec![0.0; 3]).is_err());
    }
}

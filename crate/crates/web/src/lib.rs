//! Browser bindings for three views of the toolkit: the classifier's input
//! features for a clip, the Mel filterbank, and Fleiss' kappa for a rating
//! table. The logic lives in [`ops`] so it can be tested natively; the
//! `#[wasm_bindgen]` wrappers only convert errors.

use wasm_bindgen::prelude::*;

pub mod ops;

pub use ops::Heatmap;

fn js(e: emoser::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Synthetic tone for one emotion class at the working rate.
#[wasm_bindgen(js_name = synthClip)]
pub fn synth_clip(emotion: &str, seconds: f64, seed: u32) -> Result<Vec<f32>, JsError> {
    ops::synth_clip(emotion, seconds, seed).map_err(js)
}

/// Working sample rate the feature extractor expects.
#[wasm_bindgen(js_name = workingRate)]
pub fn working_rate() -> u32 {
    emoser::audio::WORKING_RATE_HZ
}

/// Features of raw samples; `kind` is "mfcc" or "mel".
#[wasm_bindgen(js_name = featuresFromSamples)]
pub fn features_from_samples(samples: &[f32], rate_hz: u32, kind: &str) -> Result<Heatmap, JsError> {
    ops::features_from_samples(samples, rate_hz, kind).map_err(js)
}

/// Features of a RIFF/WAVE file's bytes.
#[wasm_bindgen(js_name = featuresFromWav)]
pub fn features_from_wav(bytes: &[u8], kind: &str) -> Result<Heatmap, JsError> {
    ops::features_from_wav(bytes, kind).map_err(js)
}

#[wasm_bindgen]
pub fn filterbank(n_mels: u32, n_fft: u32, rate_hz: u32) -> Result<Heatmap, JsError> {
    ops::filterbank(n_mels as usize, n_fft as usize, rate_hz).map_err(js)
}

/// Kappa report JSON for either a count table or a judge ratings CSV.
#[wasm_bindgen]
pub fn kappa(text: &str) -> Result<String, JsError> {
    ops::kappa(text).map_err(js)
}

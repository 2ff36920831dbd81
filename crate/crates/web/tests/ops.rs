use emoser::audio::{encode_wav_pcm16, WORKING_RATE_HZ};
use emoser_web::ops;

#[test]
fn synth_clip_has_requested_length_and_is_seeded() {
    let a = ops::synth_clip("happy", 0.5, 7).unwrap();
    let b = ops::synth_clip("happy", 0.5, 7).unwrap();
    let c = ops::synth_clip("happy", 0.5, 8).unwrap();
    assert_eq!(a.len(), (0.5 * WORKING_RATE_HZ as f64).round() as usize);
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(ops::synth_clip("bored", 0.5, 0).is_err());
    assert!(ops::synth_clip("sad", 60.0, 0).is_err());
}

#[test]
fn feature_heatmaps_have_classifier_shapes() {
    let samples = ops::synth_clip("sad", 1.0, 1).unwrap();
    let mfcc = ops::features_from_samples(&samples, WORKING_RATE_HZ, "mfcc").unwrap();
    assert_eq!((mfcc.rows(), mfcc.cols()), (40, 174));
    let mel = ops::features_from_samples(&samples, WORKING_RATE_HZ, "mel").unwrap();
    assert_eq!((mel.rows(), mel.cols()), (128, 174));
    // dynamic range is clipped at 80 dB below the peak
    assert!(mel.max() - mel.min() <= 80.0 + 1e-3);
    assert_eq!(mel.rgba().len(), 128 * 174 * 4);
    assert!(ops::features_from_samples(&samples, WORKING_RATE_HZ, "chroma").is_err());
}

#[test]
fn wav_upload_matches_raw_samples_after_resampling() {
    let samples: Vec<f64> = (0..16_000).map(|i| 0.3 * (i as f64 * 0.05).sin()).collect();
    let wav = encode_wav_pcm16(&samples, 16_000);
    let from_wav = ops::features_from_wav(&wav, "mfcc").unwrap();
    let quantized: Vec<f32> = samples
        .iter()
        .map(|&v| ((v * 32768.0).round() / 32768.0) as f32)
        .collect();
    let from_raw = ops::features_from_samples(&quantized, 16_000, "mfcc").unwrap();
    assert_eq!((from_wav.rows(), from_wav.cols()), (40, 174));
    let worst = from_wav
        .values()
        .iter()
        .zip(from_raw.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    assert!(worst < 1e-2, "worst difference {worst}");
    assert!(ops::features_from_wav(b"RIFF", "mfcc").is_err());
}

#[test]
fn filterbank_bands_are_triangles_in_order() {
    let fb = ops::filterbank(40, 2048, WORKING_RATE_HZ).unwrap();
    assert_eq!((fb.rows(), fb.cols()), (40, 1025));
    let peaks: Vec<usize> = (0..40)
        .map(|b| {
            let row = fb.row_slice(b);
            (0..row.len()).max_by(|&i, &j| row[i].total_cmp(&row[j])).unwrap()
        })
        .collect();
    assert!(peaks.windows(2).all(|w| w[0] < w[1]), "{peaks:?}");
    assert!(fb.min() >= 0.0);
}

#[test]
fn kappa_from_counts_and_ratings() {
    // every subject unanimous in one category
    let json = ops::kappa("8 0\n0 8\n8 0\n").unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["kappa"], 1.0);
    assert_eq!(v["N"], 3);

    let mut csv = String::from("recording_id,judge_id,decision\n");
    for j in 1..=8 {
        csv += &format!("a,{j},accept\nb,{j},{}\n", if j < 4 { "reject" } else { "accept" });
    }
    let v: serde_json::Value = serde_json::from_str(&ops::kappa(&csv).unwrap()).unwrap();
    assert_eq!(v["accept_reject"]["N"], 2);
    assert!(v["emotion"].is_null());

    assert!(ops::kappa("3 x\n").is_err());
    assert!(ops::kappa("3 5\n4\n").is_err());
}

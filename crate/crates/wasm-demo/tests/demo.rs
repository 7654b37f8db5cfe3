use prosody_probe_wasm::{layer_sweep, mel_spectrogram, pitch_track};
use serde_json::Value;

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.unwrap()).unwrap()
}

#[test]
fn pitch_track_finds_the_tone() {
    let v = parse(pitch_track(180.0, 0.02, 0.45));
    let f0: Vec<f64> = v["f0_hz"].as_array().unwrap().iter().filter_map(Value::as_f64).collect();
    assert!(f0.len() > 40);
    assert_eq!(v["voiced"].as_u64().unwrap() as usize, f0.len());
    assert!(f0.iter().all(|f| (f - 180.0).abs() < 1.0), "{f0:?}");
}

#[test]
fn pitch_track_rejects_bad_threshold() {
    assert!(pitch_track(180.0, 0.0, 1.5).is_err());
}

#[test]
fn mel_shape_and_peak_band() {
    let v = parse(mel_spectrogram(1000.0, 0.0, 40));
    let (n_frames, n_mels) = (v["n_frames"].as_u64().unwrap() as usize, v["n_mels"].as_u64().unwrap() as usize);
    assert_eq!(n_mels, 40);
    assert_eq!(n_frames, 24);
    let values: Vec<f64> = v["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(values.len(), n_frames * n_mels);
    let centers: Vec<f64> = v["centers_hz"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    // loudest band in a middle frame sits at or just above the fundamental
    let row = &values[12 * n_mels..13 * n_mels];
    let loudest = (0..n_mels).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
    assert!((centers[loudest] - 1000.0).abs() < 150.0, "{}", centers[loudest]);
}

#[test]
fn sweep_recovers_the_peak() {
    let v = parse(layer_sweep(9, 5, 2.5, 3));
    assert_eq!(v["best_layer"], 5);
    assert_eq!(v["f1"].as_array().unwrap().len(), 9);
    assert_eq!(v["converged"], true);
    assert_eq!(v["n_train"].as_u64().unwrap() + v["n_test"].as_u64().unwrap(), 1600);
}

#[test]
fn sweep_rejects_peak_outside_range() {
    assert!(layer_sweep(4, 4, 2.5, 0).is_err());
}

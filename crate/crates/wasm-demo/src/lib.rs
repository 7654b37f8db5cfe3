//! Browser bindings: pitch tracking and log-mel features on synthetic
//! audio, and a layer sweep over synthetic embeddings. Every call returns
//! a JSON string for the page to draw.

use prosody_probe::dsp::{autocorr_f0, log_mel, F0Params, MelSpec};
use prosody_probe::eval::speaker_split;
use prosody_probe::ingest::AudioClip;
use prosody_probe::probes::SolverConfig;
use prosody_probe::sweep::sweep_datasets;
use prosody_probe::synth::{self, LayeredSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Harmonic tone at `f0_hz` plus uniform noise of amplitude `noise`.
fn test_clip(f0_hz: f64, noise: f64, seconds: f64, seed: u64) -> AudioClip {
    let tone = synth::harmonic(f0_hz, 5, 0.5, seconds);
    let hiss = synth::white_noise(noise, seconds, seed);
    let samples = tone.iter().zip(&hiss).map(|(a, b)| a + b).collect();
    AudioClip::new("demo", samples)
}

#[derive(Serialize)]
struct PitchOut {
    times_s: Vec<f64>,
    /// `null` where unvoiced.
    f0_hz: Vec<Option<f64>>,
    strengths: Vec<f64>,
    voiced: usize,
}

/// Tracks pitch on one second of a synthetic harmonic tone.
#[wasm_bindgen]
pub fn pitch_track(f0_hz: f64, noise: f64, voicing_threshold: f64) -> Result<String, String> {
    let clip = test_clip(f0_hz, noise, 1.0, 1);
    let params = F0Params { voicing_threshold, ..F0Params::default() };
    let track = autocorr_f0(&clip, &params).map_err(|e| e.to_string())?;
    to_json(&PitchOut {
        voiced: track.voiced_count(),
        times_s: track.frame_times_s,
        f0_hz: track.f0_hz,
        strengths: track.strengths,
    })
}

#[derive(Serialize)]
struct MelOut {
    n_frames: usize,
    n_mels: usize,
    centers_hz: Vec<f64>,
    /// Row-major `(n_frames, n_mels)`.
    values: Vec<f64>,
}

/// Log-mel spectrogram of half a second of the same synthetic tone.
#[wasm_bindgen]
pub fn mel_spectrogram(f0_hz: f64, noise: f64, n_mels: usize) -> Result<String, String> {
    let clip = test_clip(f0_hz, noise, 0.5, 2);
    let spec = MelSpec { n_mels, ..MelSpec::default() };
    let m = log_mel(&clip, &spec).map_err(|e| e.to_string())?;
    to_json(&MelOut {
        n_frames: m.nrows(),
        n_mels: m.ncols(),
        centers_hz: spec.centers_hz(),
        values: m.iter().copied().collect(),
    })
}

#[derive(Serialize)]
struct SweepOut {
    layers: Vec<usize>,
    f1: Vec<f64>,
    separation: Vec<f64>,
    best_layer: usize,
    converged: bool,
    n_train: usize,
    n_test: usize,
}

/// Probes every layer of a synthetic stress corpus whose signal peaks at
/// `peak`, with a speaker-disjoint 80/20 split.
#[wasm_bindgen]
pub fn layer_sweep(n_layers: usize, peak: usize, strength: f64, seed: u32) -> Result<String, String> {
    if n_layers == 0 || peak >= n_layers {
        return Err(format!("peak {peak} outside 0..{n_layers}"));
    }
    let spec = LayeredSpec {
        n_layers,
        peak,
        strength,
        n_speakers: 8,
        utterances_per_speaker: 2,
        ..LayeredSpec::default()
    };
    let datasets = synth::layered_stress(&spec, seed as u64);
    let mut speakers = datasets[0].speaker_ids.clone();
    speakers.dedup();
    let split = speaker_split(&speakers, 0.8, seed as u64).map_err(|e| e.to_string())?;
    let res = sweep_datasets("synthetic", &datasets, &split, &SolverConfig::default())
        .map_err(|e| e.to_string())?;
    to_json(&SweepOut {
        layers: res.layers.iter().map(|r| r.layer).collect(),
        f1: res.layers.iter().map(|r| r.score.value).collect(),
        separation: (0..n_layers).map(|l| synth::layer_separation(&spec, l)).collect(),
        best_layer: res.best_layer,
        converged: res.all_converged(),
        n_train: res.layers[0].n_train,
        n_test: res.layers[0].n_test,
    })
}

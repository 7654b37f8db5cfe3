//! On-disk fixture corpora: manifest, per-layer NPY arrays, annotations
//! and optional audio, laid out the way an extractor would emit them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use prosody_probe::align::TaskName;
use prosody_probe::ingest::{write_array_file, write_wav, FloatDType};
use prosody_probe::sweep::RunConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

pub const STRIDE: f64 = 0.020;
pub const OFFSET: f64 = 0.0125;
pub const SYLLABLE_S: f64 = 0.2;

pub struct Utterance {
    pub id: String,
    pub speaker: String,
    /// One `(n_frames, dim)` matrix per layer.
    pub layers: Vec<Array2<f64>>,
    pub audio: Option<Vec<f64>>,
    /// `(start_s, end_s, raw label)`.
    pub spans: Vec<(f64, f64, String)>,
}

/// Writes `manifest.json`, arrays, WAVs and `annotations.csv` under `dir`
/// and returns a config pointing at them.
pub fn write_corpus(dir: &Path, model: &str, dim: usize, utts: &[Utterance], task: TaskName) -> RunConfig {
    fs::create_dir_all(dir.join("emb")).unwrap();
    let n_layers = utts[0].layers.len();
    let mut entries = Vec::new();
    let mut csv = String::from("utterance_id,speaker_id,start_s,end_s,label\n");
    for u in utts {
        let mut paths = Vec::new();
        for (l, m) in u.layers.iter().enumerate() {
            let rel = format!("emb/{}_L{l:02}.npy", u.id);
            write_array_file(dir.join(&rel), m, FloatDType::F4).unwrap();
            paths.push(rel);
        }
        let audio = u.audio.as_ref().map(|a| {
            let rel = format!("emb/{}.wav", u.id);
            write_wav(dir.join(&rel), a).unwrap();
            rel
        });
        let dur = u.layers[0].nrows() as f64 * STRIDE + 0.005;
        entries.push(json!({
            "utterance_id": u.id,
            "speaker_id": u.speaker,
            "audio_path": audio,
            "layer_paths": paths,
            "duration_s": dur,
        }));
        for (s, e, label) in &u.spans {
            writeln!(csv, "{},{},{s},{e},{label}", u.id, u.speaker).unwrap();
        }
    }
    let manifest = json!({
        "model_name": model,
        "n_layers": n_layers,
        "dim": dim,
        "frame_stride_s": STRIDE,
        "frame_offset_s": OFFSET,
        "utterances": entries,
    });
    fs::write(dir.join("manifest.json"), manifest.to_string()).unwrap();
    fs::write(dir.join("annotations.csv"), csv).unwrap();
    config_for(dir, task)
}

pub fn config_for(dir: &Path, task: TaskName) -> RunConfig {
    serde_json::from_value(json!({
        "manifest_path": dir.join("manifest.json"),
        "annotations_path": dir.join("annotations.csv"),
        "task": task,
        "output_dir": dir.join("out"),
    }))
    .unwrap()
}

/// Linear separability profile that peaks at `peak`.
pub fn separation(layer: usize, peak: usize) -> f64 {
    2.5 * (1.0 - (layer as f64 - peak as f64).abs() / 10.0)
}

/// 10 speakers × 4 utterances of 100 frames, 10 syllables each, about 30%
/// unstressed. Layer `l` holds shared Gaussian noise plus a class offset
/// of `separation(l, peak)` along the first axis, so every layer sees the
/// same noise and only the signal strength changes.
pub fn layered_stress_corpus(dir: &Path, model: &str, n_layers: usize, peak: usize, seed: u64) -> RunConfig {
    let dim = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut utts = Vec::new();
    for s in 0..10 {
        for k in 0..4 {
            let mut spans = Vec::new();
            let mut sign = vec![0.0; 100];
            for syl in 0..10 {
                let unstressed = rng.random::<f64>() < 0.3;
                let label = if unstressed {
                    if rng.random::<bool>() { "n" } else { "s" }
                } else {
                    "p"
                };
                let start = syl as f64 * SYLLABLE_S;
                spans.push((start, start + SYLLABLE_S, label.to_string()));
                sign[syl * 10..(syl + 1) * 10].fill(if unstressed { 0.5 } else { -0.5 });
            }
            let noise = Array2::from_shape_fn((100, dim), |_| -> f64 { StandardNormal.sample(&mut rng) });
            let layers = (0..n_layers)
                .map(|l| {
                    let mut m = noise.clone();
                    let sep = separation(l, peak);
                    for f in 0..100 {
                        m[[f, 0]] += sep * sign[f];
                    }
                    m
                })
                .collect();
            utts.push(Utterance {
                id: format!("spk{s:02}_u{k}"),
                speaker: format!("spk{s:02}"),
                layers,
                audio: None,
                spans,
            });
        }
    }
    write_corpus(dir, model, dim, &utts, TaskName::Stress)
}

pub fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.clone()
}

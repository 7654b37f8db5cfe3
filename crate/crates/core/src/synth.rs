//! Synthetic test signals at 16 kHz, and synthetic per-layer frame
//! datasets with a known best layer.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

use crate::align::{FrameDataset, TaskName, TaskSpec, Targets};
use crate::ingest::SAMPLE_RATE;

fn n_samples(seconds: f64) -> usize {
    (seconds * SAMPLE_RATE as f64).round() as usize
}

pub fn sine(freq_hz: f64, amplitude: f64, seconds: f64) -> Vec<f64> {
    let sr = SAMPLE_RATE as f64;
    (0..n_samples(seconds))
        .map(|i| amplitude * (2.0 * PI * freq_hz * i as f64 / sr).sin())
        .collect()
}

/// Sum of the first `n_harmonics` partials with 1/k amplitudes, scaled so
/// the peak stays below `amplitude`.
pub fn harmonic(f0_hz: f64, n_harmonics: usize, amplitude: f64, seconds: f64) -> Vec<f64> {
    let sr = SAMPLE_RATE as f64;
    let norm: f64 = (1..=n_harmonics).map(|k| 1.0 / k as f64).sum();
    (0..n_samples(seconds))
        .map(|i| {
            let t = i as f64 / sr;
            let s: f64 = (1..=n_harmonics)
                .map(|k| (2.0 * PI * k as f64 * f0_hz * t).sin() / k as f64)
                .sum();
            amplitude * s / norm
        })
        .collect()
}

/// Naive (aliased) sawtooth in [-amplitude, amplitude).
pub fn sawtooth(f0_hz: f64, amplitude: f64, seconds: f64) -> Vec<f64> {
    let sr = SAMPLE_RATE as f64;
    (0..n_samples(seconds))
        .map(|i| {
            let phase = (f0_hz * i as f64 / sr).fract();
            amplitude * (2.0 * phase - 1.0)
        })
        .collect()
}

/// Uniform white noise in [-amplitude, amplitude].
pub fn white_noise(amplitude: f64, seconds: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples(seconds))
        .map(|_| amplitude * rng.random_range(-1.0..=1.0))
        .collect()
}

/// Shape of a synthetic stress corpus for [`layered_stress`].
#[derive(Debug, Clone, Copy)]
pub struct LayeredSpec {
    pub n_layers: usize,
    pub peak: usize,
    /// Class-mean distance (in noise standard deviations) at the peak.
    pub strength: f64,
    pub n_speakers: usize,
    pub utterances_per_speaker: usize,
    /// Syllables per utterance; each lasts 10 frames.
    pub syllables: usize,
    pub dim: usize,
    /// Fraction of unstressed syllables.
    pub unstressed_rate: f64,
}

impl Default for LayeredSpec {
    fn default() -> Self {
        LayeredSpec {
            n_layers: 13,
            peak: 8,
            strength: 2.5,
            n_speakers: 10,
            utterances_per_speaker: 4,
            syllables: 10,
            dim: 8,
            unstressed_rate: 0.3,
        }
    }
}

/// Signal strength at `layer`: `strength` at the peak, falling linearly by
/// a tenth of it per layer of distance, floored at zero.
pub fn layer_separation(spec: &LayeredSpec, layer: usize) -> f64 {
    let dist = (layer as f64 - spec.peak as f64).abs();
    (spec.strength * (1.0 - dist / 10.0)).max(0.0)
}

/// One stress dataset per layer. Every layer shares the same Gaussian
/// noise; only the class offset along the first axis changes, so the best
/// layer is `spec.peak` by construction.
pub fn layered_stress(spec: &LayeredSpec, seed: u64) -> Vec<FrameDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = spec.syllables * 10;
    let n = spec.n_speakers * spec.utterances_per_speaker * frames;
    let mut labels = Vec::with_capacity(n);
    let mut speaker_ids = Vec::with_capacity(n);
    let mut utterance_ids = Vec::with_capacity(n);
    let mut frame_indices = Vec::with_capacity(n);
    for s in 0..spec.n_speakers {
        for u in 0..spec.utterances_per_speaker {
            for _ in 0..spec.syllables {
                let unstressed = rng.random::<f64>() < spec.unstressed_rate;
                labels.extend(std::iter::repeat_n(usize::from(unstressed), 10));
            }
            for f in 0..frames {
                speaker_ids.push(format!("spk{s:02}"));
                utterance_ids.push(format!("spk{s:02}_u{u}"));
                frame_indices.push(f);
            }
        }
    }
    let noise = Array2::from_shape_fn((n, spec.dim), |_| -> f64 { StandardNormal.sample(&mut rng) });
    (0..spec.n_layers)
        .map(|layer| {
            let sep = layer_separation(spec, layer);
            let mut rows = noise.clone();
            for (i, &y) in labels.iter().enumerate() {
                rows[[i, 0]] += if y == 1 { 0.5 * sep } else { -0.5 * sep };
            }
            FrameDataset {
                rows,
                targets: Targets::Classes(labels.clone()),
                speaker_ids: speaker_ids.clone(),
                utterance_ids: utterance_ids.clone(),
                frame_indices: frame_indices.clone(),
                task: TaskSpec::new(TaskName::Stress),
                layer,
            }
        })
        .collect()
}

//! Short-term autocorrelation pitch tracker.
//!
//! Each analysis frame is mean-removed and Hann-windowed; its autocorrelation
//! is divided by the window's own autocorrelation so that peak heights of a
//! periodic signal stay near 1 regardless of lag. Local maxima in the lag
//! range `[1/ceil, 1/floor]` are refined by parabolic interpolation, scored
//! with a small per-octave preference for shorter lags, and the best one is
//! voiced if its normalized height reaches the voicing threshold. There is
//! no cross-frame path search.

use std::sync::Arc;

use rustfft::{num_complex::Complex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{hann, DspError};
use crate::ingest::AudioClip;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Params {
    pub floor_hz: f64,
    pub ceil_hz: f64,
    pub voicing_threshold: f64,
    pub window_s: f64,
    pub hop_s: f64,
    /// Strength bonus per octave of shorter lag, used only for peak ranking.
    pub octave_cost: f64,
}

impl Default for F0Params {
    fn default() -> Self {
        F0Params {
            floor_hz: 75.0,
            ceil_hz: 600.0,
            voicing_threshold: 0.45,
            window_s: 0.040,
            hop_s: 0.020,
            octave_cost: 0.01,
        }
    }
}

impl F0Params {
    fn validate(&self, sample_rate: u32) -> Result<(), DspError> {
        let nyquist = sample_rate as f64 / 2.0;
        let bad = |m: &str| Err(DspError::InvalidParams(m.to_string()));
        if !(self.floor_hz > 0.0 && self.floor_hz < self.ceil_hz && self.ceil_hz < nyquist) {
            return bad("need 0 < floor_hz < ceil_hz < sample_rate / 2");
        }
        if !(self.voicing_threshold > 0.0 && self.voicing_threshold < 1.0) {
            return bad("voicing_threshold must lie in (0, 1)");
        }
        if !(self.window_s > 0.0 && self.hop_s > 0.0) {
            return bad("window_s and hop_s must be positive");
        }
        Ok(())
    }
}

/// Per-frame F0 estimates; `None` marks an unvoiced frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F0Track {
    pub utterance_id: String,
    pub frame_times_s: Vec<f64>,
    pub f0_hz: Vec<Option<f64>>,
    /// Normalized autocorrelation height of the chosen peak (0 if none).
    pub strengths: Vec<f64>,
    pub params: F0Params,
}

impl F0Track {
    pub fn len(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_hz.is_empty()
    }

    pub fn voiced_count(&self) -> usize {
        self.f0_hz.iter().filter(|f| f.is_some()).count()
    }
}

struct Analyzer {
    window: Vec<f64>,
    window_ac: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    n_fft: usize,
    min_lag: usize,
    max_lag: usize,
}

impl Analyzer {
    fn new(n_window: usize, min_lag: usize, max_lag: usize) -> Self {
        let window = hann(n_window);
        let window_ac = (0..=max_lag + 1)
            .map(|lag| {
                if lag >= n_window {
                    return 0.0;
                }
                window[..n_window - lag]
                    .iter()
                    .zip(&window[lag..])
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        let n_fft = (n_window + max_lag + 2).next_power_of_two();
        let mut planner = FftPlanner::new();
        Analyzer {
            window,
            window_ac,
            fft: planner.plan_fft_forward(n_fft),
            ifft: planner.plan_fft_inverse(n_fft),
            n_fft,
            min_lag,
            max_lag,
        }
    }

    /// Normalized autocorrelation for lags `0..=max_lag + 1`, or `None` for
    /// a silent frame.
    fn normalized_ac(&self, frame: &[f64]) -> Option<Vec<f64>> {
        let mean = frame.iter().sum::<f64>() / frame.len() as f64;
        let mut buf = vec![Complex::new(0.0, 0.0); self.n_fft];
        for (b, (x, w)) in buf.iter_mut().zip(frame.iter().zip(&self.window)) {
            b.re = (x - mean) * w;
        }
        self.fft.process(&mut buf);
        for b in buf.iter_mut() {
            *b = Complex::new(b.norm_sqr(), 0.0);
        }
        self.ifft.process(&mut buf);

        let r0 = buf[0].re;
        let energy_floor = 1e-20 * frame.len() as f64;
        if r0 <= energy_floor {
            return None;
        }
        let w0 = self.window_ac[0];
        Some(
            (0..=self.max_lag + 1)
                .map(|lag| {
                    let w = self.window_ac[lag] / w0;
                    if w <= 0.0 {
                        0.0
                    } else {
                        (buf[lag].re / r0) / w
                    }
                })
                .collect(),
        )
    }
}

/// Tracks F0 with one estimate per hop.
///
/// Frame `k` analyses samples `[k·hop, k·hop + window)` and is stamped with
/// the window center. Frames whose window would run past the clip end are
/// not produced.
pub fn autocorr_f0(clip: &AudioClip, params: &F0Params) -> Result<F0Track, DspError> {
    params.validate(clip.sample_rate)?;
    let sr = clip.sample_rate as f64;
    let n_window = (params.window_s * sr).round() as usize;
    let hop = (params.hop_s * sr).round() as usize;
    if hop == 0 || n_window < 3 {
        return Err(DspError::InvalidParams("window or hop shorter than a sample".into()));
    }
    let n = clip.samples.len();
    if n < n_window {
        return Err(DspError::TooShort {
            needed: n_window,
            got: n,
        });
    }

    let min_lag = ((sr / params.ceil_hz).ceil() as usize).max(2);
    let max_lag = ((sr / params.floor_hz).floor() as usize).min(n_window - 2);
    if min_lag >= max_lag {
        return Err(DspError::InvalidParams("window too short for pitch floor".into()));
    }
    let analyzer = Analyzer::new(n_window, min_lag, max_lag);

    let n_frames = 1 + (n - n_window) / hop;
    let mut times = Vec::with_capacity(n_frames);
    let mut f0 = Vec::with_capacity(n_frames);
    let mut strengths = Vec::with_capacity(n_frames);
    for k in 0..n_frames {
        let start = k * hop;
        times.push((start as f64 + n_window as f64 / 2.0) / sr);
        let frame = &clip.samples[start..start + n_window];
        let best = analyzer
            .normalized_ac(frame)
            .and_then(|r| best_peak(&r, &analyzer, sr, params));
        match best {
            Some((hz, strength)) if strength >= params.voicing_threshold => {
                f0.push(Some(hz));
                strengths.push(strength);
            }
            Some((_, strength)) => {
                f0.push(None);
                strengths.push(strength);
            }
            None => {
                f0.push(None);
                strengths.push(0.0);
            }
        }
    }

    Ok(F0Track {
        utterance_id: clip.utterance_id.clone(),
        frame_times_s: times,
        f0_hz: f0,
        strengths,
        params: *params,
    })
}

/// Highest-ranked interpolated peak as `(hz, strength)`.
fn best_peak(r: &[f64], a: &Analyzer, sr: f64, params: &F0Params) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64, f64)> = None;
    for lag in a.min_lag..=a.max_lag {
        let (prev, cur, next) = (r[lag - 1], r[lag], r[lag + 1]);
        if !(cur > prev && cur >= next) || cur <= 0.0 {
            continue;
        }
        let denom = prev - 2.0 * cur + next;
        let (offset, height) = if denom < 0.0 {
            let d = (0.5 * (prev - next) / denom).clamp(-0.5, 0.5);
            (d, cur - 0.25 * (prev - next) * d)
        } else {
            (0.0, cur)
        };
        let lag_samples = lag as f64 + offset;
        let hz = sr / lag_samples;
        if hz < params.floor_hz || hz > params.ceil_hz {
            continue;
        }
        let score = height - params.octave_cost * (params.floor_hz * lag_samples / sr).log2();
        if best.is_none_or(|(_, _, s)| score > s) {
            best = Some((hz, height, score));
        }
    }
    best.map(|(hz, h, _)| (hz, h))
}

/// Assigns each embedding frame the estimate nearest its center.
///
/// Frames with no analysis time within half a hop, or whose nearest estimate is
/// unvoiced, get `None`.
pub fn align_f0_to_frames(
    track: &F0Track,
    n_frames: usize,
    frame_stride_s: f64,
    frame_offset_s: f64,
) -> Vec<Option<f64>> {
    let times = &track.frame_times_s;
    (0..n_frames)
        .map(|i| {
            let c = i as f64 * frame_stride_s + frame_offset_s;
            let k = times.partition_point(|&t| t < c);
            let nearest = [k.checked_sub(1), (k < times.len()).then_some(k)]
                .into_iter()
                .flatten()
                .min_by(|&a, &b| (times[a] - c).abs().total_cmp(&(times[b] - c).abs()))?;
            if (times[nearest] - c).abs() > 0.5 * track.params.hop_s + 1e-9 {
                return None;
            }
            track.f0_hz[nearest]
        })
        .collect()
}

use ndarray::Array2;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{hann, DspError};
use crate::ingest::AudioClip;

/// Floor applied to filterbank energies before the log.
pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Log-mel filterbank configuration.
///
/// The defaults give 40 bands over 0-8 kHz with a 25 ms window and 20 ms
/// hop, so frame `i` is centered at `12.5 ms + i·20 ms`, the same grid as
/// the probed models' embedding frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelSpec {
    pub n_mels: usize,
    pub window_s: f64,
    pub hop_s: f64,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
}

impl Default for MelSpec {
    fn default() -> Self {
        MelSpec {
            n_mels: 40,
            window_s: 0.025,
            hop_s: 0.020,
            fmin_hz: 0.0,
            fmax_hz: 8000.0,
        }
    }
}

impl MelSpec {
    fn validate(&self, sample_rate: u32) -> Result<(), DspError> {
        let bad = |m: &str| Err(DspError::InvalidParams(m.to_string()));
        if self.n_mels == 0 {
            return bad("n_mels must be at least 1");
        }
        if !(self.fmin_hz >= 0.0 && self.fmin_hz < self.fmax_hz) {
            return bad("need 0 <= fmin_hz < fmax_hz");
        }
        if self.fmax_hz > sample_rate as f64 / 2.0 {
            return bad("fmax_hz exceeds the Nyquist frequency");
        }
        if !(self.window_s > 0.0 && self.hop_s > 0.0) {
            return bad("window_s and hop_s must be positive");
        }
        Ok(())
    }

    pub fn window_len(&self, sample_rate: u32) -> usize {
        (self.window_s * sample_rate as f64).round() as usize
    }

    pub fn hop_len(&self, sample_rate: u32) -> usize {
        (self.hop_s * sample_rate as f64).round() as usize
    }

    pub fn n_fft(&self, sample_rate: u32) -> usize {
        self.window_len(sample_rate).next_power_of_two()
    }

    /// Time of frame 0's window center, in seconds.
    pub fn frame_offset_s(&self, sample_rate: u32) -> f64 {
        self.window_len(sample_rate) as f64 / 2.0 / sample_rate as f64
    }

    /// Band center frequencies in Hz.
    pub fn centers_hz(&self) -> Vec<f64> {
        self.edges_hz()[1..=self.n_mels].to_vec()
    }

    fn edges_hz(&self) -> Vec<f64> {
        let (lo, hi) = (hz_to_mel(self.fmin_hz), hz_to_mel(self.fmax_hz));
        let step = (hi - lo) / (self.n_mels + 1) as f64;
        (0..self.n_mels + 2)
            .map(|i| mel_to_hz(lo + step * i as f64))
            .collect()
    }

    /// Triangular filter weights, shape `(n_mels, n_fft / 2 + 1)`.
    pub fn filterbank(&self, sample_rate: u32) -> Array2<f64> {
        let n_fft = self.n_fft(sample_rate);
        let n_bins = n_fft / 2 + 1;
        let edges = self.edges_hz();
        let bin_hz = sample_rate as f64 / n_fft as f64;
        Array2::from_shape_fn((self.n_mels, n_bins), |(m, k)| {
            let f = k as f64 * bin_hz;
            let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
            if f > l && f <= c {
                (f - l) / (c - l)
            } else if f > c && f < r {
                (r - f) / (r - c)
            } else {
                0.0
            }
        })
    }
}

/// Hann-windowed power spectra projected onto mel bands, then `ln`.
///
/// Output shape is `(1 + (n_samples - window) / hop, n_mels)`.
pub fn log_mel(clip: &AudioClip, spec: &MelSpec) -> Result<Array2<f64>, DspError> {
    spec.validate(clip.sample_rate)?;
    let sr = clip.sample_rate;
    let (n_window, hop, n_fft) = (spec.window_len(sr), spec.hop_len(sr), spec.n_fft(sr));
    if hop == 0 || n_window == 0 {
        return Err(DspError::InvalidParams("window or hop shorter than a sample".into()));
    }
    let n = clip.samples.len();
    if n < n_window {
        return Err(DspError::TooShort {
            needed: n_window,
            got: n,
        });
    }

    let window = hann(n_window);
    let bank = spec.filterbank(sr);
    let fft = FftPlanner::new().plan_fft_forward(n_fft);
    let n_frames = 1 + (n - n_window) / hop;
    let n_bins = n_fft / 2 + 1;

    let mut out = Array2::zeros((n_frames, spec.n_mels));
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut power = vec![0.0; n_bins];
    for i in 0..n_frames {
        let frame = &clip.samples[i * hop..i * hop + n_window];
        buf.iter_mut().for_each(|b| *b = Complex::new(0.0, 0.0));
        for (b, (x, w)) in buf.iter_mut().zip(frame.iter().zip(&window)) {
            b.re = x * w;
        }
        fft.process(&mut buf);
        for (p, b) in power.iter_mut().zip(&buf) {
            *p = b.norm_sqr();
        }
        for (m, weights) in bank.rows().into_iter().enumerate() {
            let e: f64 = weights.iter().zip(&power).map(|(w, p)| w * p).sum();
            out[[i, m]] = e.max(LOG_FLOOR).ln();
        }
    }
    Ok(out)
}

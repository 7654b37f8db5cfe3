//! Acoustic front ends: autocorrelation F0 tracking and log-mel filterbanks.

mod mel;
mod pitch;

use thiserror::Error;

pub use mel::{hz_to_mel, log_mel, mel_to_hz, MelSpec, LOG_FLOOR};
pub use pitch::{align_f0_to_frames, autocorr_f0, F0Params, F0Track};

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("clip has {got} samples, analysis window needs {needed}")]
    TooShort { needed: usize, got: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Periodic Hann window of length `n`.
pub(crate) fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

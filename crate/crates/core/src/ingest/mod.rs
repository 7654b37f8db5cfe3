//! Readers for every on-disk input: embedding arrays, manifests, annotation
//! tables, WAV audio and numeric pinyin.

mod annotations;
mod manifest;
pub mod npy;
mod pinyin;
mod wav;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use annotations::{read_accent_events, read_annotations, AccentEvent, LabelSpan};
pub use manifest::{read_manifest, EmbeddingSequence, Manifest, UtteranceEntry};
pub use npy::{read_array_file, write_array_file, FloatDType};
pub use pinyin::pinyin_tone;
pub use wav::{read_wav, write_wav, AudioClip, SAMPLE_RATE};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}not an NPY file (bad magic bytes)", fmt_path(path))]
    BadMagic { path: Option<PathBuf> },
    #[error("{}malformed NPY header: {reason}", fmt_path(path))]
    BadHeader {
        path: Option<PathBuf>,
        reason: String,
    },
    #[error("unsupported NPY dtype {0:?}; expected '<f4' or '<f8'")]
    UnsupportedDType(String),
    #[error("{}payload has {actual_bytes} bytes, header shape needs {expected_bytes}", fmt_path(path))]
    ShapeMismatch {
        path: Option<PathBuf>,
        expected_bytes: usize,
        actual_bytes: usize,
    },
    #[error("{}non-finite value at flat index {index}", fmt_path(path))]
    NonFinite { path: Option<PathBuf>, index: usize },
    #[error("manifest {}: missing field `{field}`", path.display())]
    MissingField { path: PathBuf, field: String },
    #[error("manifest {}: {reason}", path.display())]
    InvalidManifest { path: PathBuf, reason: String },
    #[error("duplicate utterance id {0:?} in manifest")]
    DuplicateUtterance(String),
    #[error("manifest references missing file {}", .0.display())]
    DanglingPath(PathBuf),
    #[error("{}: array has {actual} columns, manifest declares dim {expected}", path.display())]
    DimMismatch {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },
    #[error("{}:{line}: {reason}", path.display())]
    ParseError {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("{}:{line}: negative time {value}", path.display())]
    NegativeTime { path: PathBuf, line: u64, value: f64 },
    #[error("{}: unsupported WAV encoding: {reason}", path.display())]
    UnsupportedEncoding { path: PathBuf, reason: String },
    #[error("{}: sample rate {rate} Hz, expected {SAMPLE_RATE} Hz", path.display())]
    UnsupportedRate { path: PathBuf, rate: u32 },
    #[error("invalid pinyin syllable {0:?}")]
    InvalidPinyin(String),
}

fn fmt_path(path: &Option<PathBuf>) -> String {
    path.as_ref()
        .map(|p| format!("{}: ", p.display()))
        .unwrap_or_default()
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Attaches a file path to errors raised while parsing a byte buffer.
    pub(crate) fn with_path(self, p: &Path) -> Self {
        let p = Some(p.to_path_buf());
        match self {
            IngestError::BadMagic { .. } => IngestError::BadMagic { path: p },
            IngestError::BadHeader { reason, .. } => IngestError::BadHeader { path: p, reason },
            IngestError::ShapeMismatch {
                expected_bytes,
                actual_bytes,
                ..
            } => IngestError::ShapeMismatch {
                path: p,
                expected_bytes,
                actual_bytes,
            },
            IngestError::NonFinite { index, .. } => IngestError::NonFinite { path: p, index },
            other => other,
        }
    }
}

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::npy::{read_array_file, read_array_shape};
use super::IngestError;

/// Index binding utterances and speakers to audio and per-layer embedding
/// arrays for one model.
///
/// Paths in the JSON file are relative to the manifest's directory; after
/// [`read_manifest`] they are resolved and utterances are sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub model_name: String,
    /// Number of probe-able outputs, e.g. 13 for layers 0..=12.
    pub n_layers: usize,
    pub dim: usize,
    pub frame_stride_s: f64,
    pub frame_offset_s: f64,
    pub utterances: Vec<UtteranceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceEntry {
    pub utterance_id: String,
    pub speaker_id: String,
    #[serde(default)]
    pub audio_path: Option<PathBuf>,
    /// One array path per layer, indexed by layer number.
    pub layer_paths: Vec<PathBuf>,
    pub duration_s: f64,
}

/// One utterance's frame × dim matrix for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    pub utterance_id: String,
    pub layer: usize,
    pub frames: Array2<f64>,
    pub frame_stride_s: f64,
    pub frame_offset_s: f64,
}

impl EmbeddingSequence {
    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest, IngestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    let mut manifest: Manifest = serde_json::from_str(&text).map_err(|e| {
        let msg = e.to_string();
        match msg
            .strip_prefix("missing field `")
            .and_then(|rest| rest.split('`').next())
        {
            Some(field) => IngestError::MissingField {
                path: path.to_path_buf(),
                field: field.to_string(),
            },
            None => IngestError::InvalidManifest {
                path: path.to_path_buf(),
                reason: msg,
            },
        }
    })?;

    let base = path.parent().unwrap_or_else(|| Path::new("."));
    manifest.resolve_paths(base);
    manifest.validate(path)?;
    manifest
        .utterances
        .sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
    manifest.check_spot_dim()?;
    Ok(manifest)
}

impl Manifest {
    fn resolve_paths(&mut self, base: &Path) {
        for utt in &mut self.utterances {
            if let Some(audio) = utt.audio_path.as_mut() {
                if audio.is_relative() {
                    *audio = base.join(&*audio);
                }
            }
            for p in &mut utt.layer_paths {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
    }

    fn validate(&self, path: &Path) -> Result<(), IngestError> {
        let invalid = |reason: String| IngestError::InvalidManifest {
            path: path.to_path_buf(),
            reason,
        };
        if self.n_layers == 0 {
            return Err(invalid("n_layers must be at least 1".into()));
        }
        if self.dim == 0 {
            return Err(invalid("dim must be at least 1".into()));
        }
        if self.frame_stride_s.is_nan() || self.frame_stride_s <= 0.0 || !self.frame_offset_s.is_finite() {
            return Err(invalid("frame_stride_s must be positive".into()));
        }

        let mut seen = HashSet::new();
        for utt in &self.utterances {
            if !seen.insert(utt.utterance_id.as_str()) {
                return Err(IngestError::DuplicateUtterance(utt.utterance_id.clone()));
            }
            if utt.layer_paths.len() != self.n_layers {
                return Err(invalid(format!(
                    "utterance {} lists {} layer arrays, n_layers is {}",
                    utt.utterance_id,
                    utt.layer_paths.len(),
                    self.n_layers
                )));
            }
            let audio = utt.audio_path.iter();
            for p in utt.layer_paths.iter().chain(audio) {
                if !p.exists() {
                    return Err(IngestError::DanglingPath(p.clone()));
                }
            }
        }
        Ok(())
    }

    fn check_spot_dim(&self) -> Result<(), IngestError> {
        if let Some(first) = self.utterances.first() {
            let p = &first.layer_paths[0];
            let (_, cols) = read_array_shape(p)?;
            if cols != self.dim {
                return Err(IngestError::DimMismatch {
                    path: p.clone(),
                    expected: self.dim,
                    actual: cols,
                });
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> std::ops::Range<usize> {
        0..self.n_layers
    }

    pub fn utterance(&self, utterance_id: &str) -> Option<&UtteranceEntry> {
        self.utterances
            .binary_search_by(|u| u.utterance_id.as_str().cmp(utterance_id))
            .ok()
            .map(|i| &self.utterances[i])
    }

    /// Loads one utterance's embeddings for `layer`, checking the column count.
    pub fn load_sequence(
        &self,
        utt: &UtteranceEntry,
        layer: usize,
    ) -> Result<EmbeddingSequence, IngestError> {
        let path = utt.layer_paths.get(layer).ok_or_else(|| IngestError::InvalidManifest {
            path: PathBuf::from(&utt.utterance_id),
            reason: format!("layer {layer} outside 0..{}", self.n_layers),
        })?;
        let frames = read_array_file(path)?;
        if frames.ncols() != self.dim {
            return Err(IngestError::DimMismatch {
                path: path.clone(),
                expected: self.dim,
                actual: frames.ncols(),
            });
        }
        if frames.nrows() == 0 {
            return Err(IngestError::InvalidManifest {
                path: path.clone(),
                reason: "embedding array has no frames".into(),
            });
        }
        Ok(EmbeddingSequence {
            utterance_id: utt.utterance_id.clone(),
            layer,
            frames,
            frame_stride_s: self.frame_stride_s,
            frame_offset_s: self.frame_offset_s,
        })
    }

    /// Loads every utterance's embeddings for one layer, in utterance-id order.
    pub fn load_layer(&self, layer: usize) -> Result<Vec<EmbeddingSequence>, IngestError> {
        self.utterances
            .iter()
            .map(|u| self.load_sequence(u, layer))
            .collect()
    }
}

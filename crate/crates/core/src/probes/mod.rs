//! Linear probes: least squares for regression, L1-penalized logistic
//! regression (binary or softmax) trained with SAGA for classification.

mod linear;
mod saga;
mod standardize;

use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use linear::fit_least_squares;
pub use saga::{fit_logistic_saga, logistic_objective, smooth_loss_and_grad, soft_threshold};
pub use standardize::Standardizer;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("probe kind {kind:?} cannot fit {n_classes} classes")]
    KindMismatch { kind: ProbeKind, n_classes: usize },
    #[error("label {label} outside 0..{n_classes}")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("expected {expected} feature columns, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("{rows} rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("no training examples")]
    Empty,
    #[error("non-finite feature value")]
    NonFinite,
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error("model file {}: {reason}", path.display())]
    ModelFile {
        path: std::path::PathBuf,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    Linear,
    LogisticBinary,
    LogisticMultinomial,
}

/// Solver settings. Defaults: `C = 1`, threshold 0.5, 100 epochs, tol 1e-4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Weight on the summed data loss relative to the L1 penalty.
    #[serde(rename = "C")]
    pub c: f64,
    pub threshold: f64,
    pub max_epochs: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            c: 1.0,
            threshold: 0.5,
            max_epochs: 100,
            tol: 1e-4,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub(crate) fn validate(&self) -> Result<(), ProbeError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(ProbeError::InvalidConfig("C must be positive".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(ProbeError::InvalidConfig("threshold must lie in (0, 1)".into()));
        }
        if self.max_epochs == 0 || self.tol.is_nan() || self.tol <= 0.0 {
            return Err(ProbeError::InvalidConfig(
                "max_epochs and tol must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub epochs_run: usize,
    pub final_objective: f64,
    pub converged: bool,
    /// Objective after each epoch (empty for closed-form fits).
    #[serde(default)]
    pub objective_history: Vec<f64>,
}

/// A fitted probe. Weight row `c` scores class `c`, except for binary
/// probes, whose single row scores `classes[1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub kind: ProbeKind,
    pub weights: Array2<f64>,
    pub intercepts: Vec<f64>,
    pub classes: Vec<String>,
    pub config: Option<SolverConfig>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    /// Class indices plus per-class probabilities, shape `(n, n_classes)`.
    Classes {
        labels: Vec<usize>,
        probabilities: Array2<f64>,
    },
    Values(Vec<f64>),
}

impl ProbeModel {
    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn save(&self, path: &Path) -> Result<(), ProbeError> {
        save_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self, ProbeError> {
        load_json(path)
    }
}

/// A probe bundled with the standardizer fitted on its training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedProbe {
    pub standardizer: Standardizer,
    pub model: ProbeModel,
}

impl SavedProbe {
    pub fn save(&self, path: &Path) -> Result<(), ProbeError> {
        save_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self, ProbeError> {
        load_json(path)
    }

    pub fn predict(&self, x: ArrayView2<f64>, threshold: f64) -> Result<Prediction, ProbeError> {
        let z = self.standardizer.apply(x)?;
        predict(&self.model, z.view(), threshold)
    }
}

fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ProbeError> {
    let err = |reason: String| ProbeError::ModelFile {
        path: path.to_path_buf(),
        reason,
    };
    let text = serde_json::to_string_pretty(value).map_err(|e| err(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| err(e.to_string()))
}

fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ProbeError> {
    let err = |reason: String| ProbeError::ModelFile {
        path: path.to_path_buf(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| err(e.to_string()))
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// In-place softmax.
pub(crate) fn softmax(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

/// Applies a fitted probe.
///
/// Binary probes pick `classes[1]` when its probability is `>= threshold`;
/// multinomial probes take the argmax, lowest index winning ties.
pub fn predict(
    model: &ProbeModel,
    x: ArrayView2<f64>,
    threshold: f64,
) -> Result<Prediction, ProbeError> {
    if x.ncols() != model.dim() {
        return Err(ProbeError::DimMismatch {
            expected: model.dim(),
            actual: x.ncols(),
        });
    }
    let scores = x.dot(&model.weights.t());
    match model.kind {
        ProbeKind::Linear => Ok(Prediction::Values(
            scores.column(0).iter().map(|s| s + model.intercepts[0]).collect(),
        )),
        ProbeKind::LogisticBinary => {
            let mut probabilities = Array2::zeros((x.nrows(), 2));
            let mut labels = Vec::with_capacity(x.nrows());
            for (i, s) in scores.column(0).iter().enumerate() {
                let p = sigmoid(s + model.intercepts[0]);
                probabilities[[i, 0]] = 1.0 - p;
                probabilities[[i, 1]] = p;
                labels.push(usize::from(p >= threshold));
            }
            Ok(Prediction::Classes {
                labels,
                probabilities,
            })
        }
        ProbeKind::LogisticMultinomial => {
            let k = model.classes.len();
            let mut probabilities = Array2::zeros((x.nrows(), k));
            let mut labels = Vec::with_capacity(x.nrows());
            let mut z = vec![0.0; k];
            for (i, row) in scores.rows().into_iter().enumerate() {
                for c in 0..k {
                    z[c] = row[c] + model.intercepts[c];
                }
                let mut best = 0;
                for c in 1..k {
                    if z[c] > z[best] {
                        best = c;
                    }
                }
                softmax(&mut z);
                probabilities.row_mut(i).iter_mut().zip(&z).for_each(|(p, v)| *p = *v);
                labels.push(best);
            }
            Ok(Prediction::Classes {
                labels,
                probabilities,
            })
        }
    }
}

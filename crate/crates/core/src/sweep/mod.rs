//! End-to-end runs: build one dataset per layer, split by speaker, fit a
//! fresh probe per layer, score on held-out speakers and write the results.

mod extract;
mod output;

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{
    build_frame_dataset, build_regression_dataset, prepare_spans, spread_accents, AlignError,
    FrameDataset, TaskKind, TaskName, TaskSpec, Targets,
};
use crate::dsp::{align_f0_to_frames, autocorr_f0, log_mel, DspError, F0Params, MelSpec};
use crate::eval::{
    check_leakage, majority_baseline, random_baseline, score, speaker_split, EvalError,
    ScoreReport, SplitAssignment, TrainingPrior,
};
use crate::ingest::{
    npy, read_accent_events, read_annotations, read_manifest, read_wav, EmbeddingSequence,
    IngestError, LabelSpan, Manifest, UtteranceEntry,
};
use crate::probes::{
    fit_least_squares, fit_logistic_saga, predict, Prediction, ProbeError, ProbeKind,
    SavedProbe, SolverConfig, Standardizer,
};

pub use extract::{extract_f0, extract_fbank};
pub use output::{
    read_sweep_rows, report, write_baselines, write_sweep, BaselineRow, ReportRow, SweepRow,
};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("config {}: {reason}", path.display())]
    Config { path: PathBuf, reason: String },
    #[error("invalid run: {0}")]
    Invalid(String),
    #[error("layer {layer} outside 0..{n_layers}")]
    LayerOutOfRange { layer: usize, n_layers: usize },
    #[error("utterance {0:?} has no audio_path")]
    MissingAudio(String),
    #[error("no sweep results under {}", .0.display())]
    NoResults(PathBuf),
    #[error("split leaves the {0} side without rows")]
    EmptySplit(&'static str),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("task {task}, {stage}: {source}")]
    Context {
        task: TaskName,
        stage: String,
        #[source]
        source: Box<SweepError>,
    },
}

impl SweepError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        SweepError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn context(self, task: TaskName, stage: impl Into<String>) -> Self {
        SweepError::Context {
            task,
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping context wrappers.
    pub fn root(&self) -> &SweepError {
        match self {
            SweepError::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub ratio: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { ratio: 0.8, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineFlags {
    pub random: bool,
    pub fbank: bool,
}

impl Default for BaselineFlags {
    fn default() -> Self {
        BaselineFlags {
            random: true,
            fbank: false,
        }
    }
}

fn default_draws() -> usize {
    100
}

/// Everything one (model, task) run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub manifest_path: PathBuf,
    pub annotations_path: PathBuf,
    /// Required for the accent task.
    #[serde(default)]
    pub accent_events_path: Option<PathBuf>,
    pub task: TaskName,
    /// `None` sweeps every layer in the manifest.
    #[serde(default)]
    pub layers: Option<Vec<usize>>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub baselines: BaselineFlags,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub f0: F0Params,
    #[serde(default)]
    pub mel: MelSpec,
    #[serde(default = "default_draws")]
    pub random_draws: usize,
}

impl RunConfig {
    /// Reads a JSON config. Relative paths are taken relative to the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SweepError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SweepError::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| SweepError::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.manifest_path);
        fix(&mut cfg.annotations_path);
        fix(&mut cfg.output_dir);
        if let Some(p) = cfg.accent_events_path.as_mut() {
            fix(p);
        }
        Ok(cfg)
    }
}

/// One layer's probe and held-out score.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerResult {
    pub layer: usize,
    pub score: ScoreReport,
    pub n_train: usize,
    pub n_test: usize,
    pub probe: SavedProbe,
}

impl LayerResult {
    pub fn converged(&self) -> bool {
        self.probe.model.diagnostics.converged
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSweepResult {
    pub model_name: String,
    pub task: TaskSpec,
    pub split: SplitAssignment,
    /// Sorted by layer.
    pub layers: Vec<LayerResult>,
    pub best_layer: usize,
}

impl LayerSweepResult {
    pub fn all_converged(&self) -> bool {
        self.layers.iter().all(LayerResult::converged)
    }

    pub fn curve(&self) -> Vec<(usize, f64)> {
        self.layers.iter().map(|r| (r.layer, r.score.value)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BaselineResult {
    pub random: Option<ScoreReport>,
    pub majority: Option<ScoreReport>,
    pub fbank: Option<LayerResult>,
}

impl BaselineResult {
    pub fn all_converged(&self) -> bool {
        self.fbank.as_ref().is_none_or(LayerResult::converged)
    }
}

/// Argmax of the metric, lowest layer on ties.
pub fn best_layer(results: &[LayerResult]) -> Option<usize> {
    let mut best: Option<&LayerResult> = None;
    for r in results {
        match best {
            Some(b) if r.score.value < b.score.value => {}
            Some(b) if r.score.value == b.score.value && r.layer > b.layer => {}
            _ => best = Some(r),
        }
    }
    best.map(|r| r.layer)
}

/// Standardizes on the training rows, fits the task's probe and scores the
/// held-out speakers.
///
/// Aborts with [`EvalError::SpeakerLeakage`] if any speaker lands on both
/// sides once rows are assigned.
pub fn evaluate_dataset(
    dataset: &FrameDataset,
    split: &SplitAssignment,
    solver: &SolverConfig,
) -> Result<LayerResult, SweepError> {
    let (train_idx, test_idx) = split.partition(&dataset.speaker_ids)?;
    let train = dataset.select(&train_idx);
    let test = dataset.select(&test_idx);
    check_leakage(&train.speaker_ids, &test.speaker_ids)?;
    if train.is_empty() {
        return Err(SweepError::EmptySplit("train"));
    }
    if test.is_empty() {
        return Err(SweepError::EmptySplit("test"));
    }

    let standardizer = Standardizer::fit(train.rows.view())?;
    let x_train = standardizer.apply(train.rows.view())?;
    let x_test = standardizer.apply(test.rows.view())?;
    let task = &dataset.task;
    let mut model = match (&train.targets, task.kind) {
        (Targets::Values(y), TaskKind::Regression) => fit_least_squares(x_train.view(), y)?,
        (Targets::Classes(y), TaskKind::Binary) => {
            fit_logistic_saga(x_train.view(), y, &task.classes, solver, ProbeKind::LogisticBinary)?
        }
        (Targets::Classes(y), TaskKind::Multiclass) => fit_logistic_saga(
            x_train.view(),
            y,
            &task.classes,
            solver,
            ProbeKind::LogisticMultinomial,
        )?,
        _ => return Err(EvalError::TargetKind.into()),
    };
    model.config = Some(*solver);

    let predicted = match predict(&model, x_test.view(), solver.threshold)? {
        Prediction::Classes { labels, .. } => Targets::Classes(labels),
        Prediction::Values(v) => Targets::Values(v),
    };
    let report = score(task, &test.targets, &predicted)?;
    Ok(LayerResult {
        layer: dataset.layer,
        score: report,
        n_train: train.len(),
        n_test: test.len(),
        probe: SavedProbe {
            standardizer,
            model,
        },
    })
}

/// Runs `job` for every layer, in parallel when the `parallel` feature is
/// on, and returns results in layer order. The first failing layer (by
/// layer index) determines the error.
fn fan_out<F>(layers: &[usize], job: F) -> Result<Vec<LayerResult>, SweepError>
where
    F: Fn(usize) -> Result<LayerResult, SweepError> + Sync,
{
    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        layers.par_iter().map(|&l| job(l)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = layers.iter().map(|&l| job(l)).collect();

    let mut out = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    out.sort_by_key(|r| r.layer);
    Ok(out)
}

/// Sweeps already-built datasets, one per layer, against a fixed split.
pub fn sweep_datasets(
    model_name: &str,
    datasets: &[FrameDataset],
    split: &SplitAssignment,
    solver: &SolverConfig,
) -> Result<LayerSweepResult, SweepError> {
    let first = datasets
        .first()
        .ok_or_else(|| SweepError::Invalid("no datasets to sweep".into()))?;
    let task = first.task.clone();
    split.check_disjoint()?;
    let by_layer: HashMap<usize, &FrameDataset> = datasets.iter().map(|d| (d.layer, d)).collect();
    let layers: Vec<usize> = by_layer.keys().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let results = fan_out(&layers, |layer| {
        evaluate_dataset(by_layer[&layer], split, solver)
            .map_err(|e| e.context(task.name, format!("layer {layer}")))
    })?;
    let best = best_layer(&results).expect("at least one layer");
    Ok(LayerSweepResult {
        model_name: model_name.to_string(),
        task,
        split: split.clone(),
        layers: results,
        best_layer: best,
    })
}

/// A loaded run: manifest, task spans, the shared speaker split and, for
/// the F0 task, per-frame targets.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub config: RunConfig,
    pub manifest: Manifest,
    pub task: TaskSpec,
    pub spans: Vec<LabelSpan>,
    pub split: SplitAssignment,
    f0_targets: Option<HashMap<String, Vec<Option<f64>>>>,
}

impl PreparedRun {
    pub fn new(config: &RunConfig) -> Result<Self, SweepError> {
        let manifest = read_manifest(&config.manifest_path)?;
        let task = TaskSpec::new(config.task);
        let raw = read_annotations(&config.annotations_path)?;
        let spans = if task.name == TaskName::Accent {
            let path = config.accent_events_path.as_ref().ok_or_else(|| {
                SweepError::Invalid("the accent task needs accent_events_path".into())
            })?;
            let events = read_accent_events(path)?;
            spread_accents(&events, &raw).spans
        } else {
            raw
        };
        let spans = prepare_spans(&task, &spans)?;
        let total = spans.len();
        let spans: Vec<LabelSpan> = spans
            .into_iter()
            .filter(|s| manifest.utterance(&s.utterance_id).is_some())
            .collect();
        if spans.len() < total {
            log::warn!(
                "{} annotation spans refer to utterances missing from the manifest",
                total - spans.len()
            );
        }
        let speakers: Vec<&str> = spans.iter().map(|s| s.speaker_id.as_str()).collect();
        let split = speaker_split(&speakers, config.split.ratio, config.split.seed)?;

        let mut run = PreparedRun {
            config: config.clone(),
            manifest,
            task,
            spans,
            split,
            f0_targets: None,
        };
        if run.task.kind == TaskKind::Regression {
            run.f0_targets = Some(run.compute_f0_targets()?);
        }
        Ok(run)
    }

    /// Manifest entries that carry at least one span.
    fn annotated_utterances(&self) -> Vec<&UtteranceEntry> {
        let ids: BTreeSet<&str> = self.spans.iter().map(|s| s.utterance_id.as_str()).collect();
        self.manifest
            .utterances
            .iter()
            .filter(|u| ids.contains(u.utterance_id.as_str()))
            .collect()
    }

    fn audio_path<'a>(&self, utt: &'a UtteranceEntry) -> Result<&'a Path, SweepError> {
        utt.audio_path
            .as_deref()
            .ok_or_else(|| SweepError::MissingAudio(utt.utterance_id.clone()))
    }

    fn compute_f0_targets(&self) -> Result<HashMap<String, Vec<Option<f64>>>, SweepError> {
        let mut out = HashMap::new();
        for utt in self.annotated_utterances() {
            let clip = read_wav(self.audio_path(utt)?)?;
            let track = autocorr_f0(&clip, &self.config.f0)?;
            let path = utt.layer_paths.first().ok_or_else(|| {
                SweepError::Invalid(format!("{} lists no layers", utt.utterance_id))
            })?;
            let (n_frames, _) = npy::read_array_shape(path)?;
            let aligned = align_f0_to_frames(
                &track,
                n_frames,
                self.manifest.frame_stride_s,
                self.manifest.frame_offset_s,
            );
            out.insert(utt.utterance_id.clone(), aligned);
        }
        Ok(out)
    }

    /// The layers to sweep: configured ones, deduplicated and sorted, or all.
    pub fn layers(&self) -> Result<Vec<usize>, SweepError> {
        let n_layers = self.manifest.n_layers;
        let layers: BTreeSet<usize> = match &self.config.layers {
            Some(l) => l.iter().copied().collect(),
            None => self.manifest.layers().collect(),
        };
        if layers.is_empty() {
            return Err(SweepError::Invalid("no layers selected".into()));
        }
        if let Some(&layer) = layers.iter().find(|&&l| l >= n_layers) {
            return Err(SweepError::LayerOutOfRange { layer, n_layers });
        }
        Ok(layers.into_iter().collect())
    }

    fn build(&self, sequences: &[EmbeddingSequence]) -> Result<FrameDataset, SweepError> {
        let ds = match &self.f0_targets {
            Some(targets) => build_regression_dataset(&self.task, &self.spans, sequences, targets)?,
            None => build_frame_dataset(&self.task, &self.spans, sequences)?,
        };
        Ok(ds)
    }

    /// Frame dataset for one layer of the manifest.
    pub fn dataset(&self, layer: usize) -> Result<FrameDataset, SweepError> {
        if layer >= self.manifest.n_layers {
            return Err(SweepError::LayerOutOfRange {
                layer,
                n_layers: self.manifest.n_layers,
            });
        }
        let sequences = self
            .annotated_utterances()
            .into_iter()
            .map(|u| self.manifest.load_sequence(u, layer))
            .collect::<Result<Vec<_>, _>>()?;
        self.build(&sequences)
    }

    /// Targets and provenance without features: every sequence is read for
    /// its frame count only, giving zero-width rows.
    pub fn targets_only(&self) -> Result<FrameDataset, SweepError> {
        let sequences = self
            .annotated_utterances()
            .into_iter()
            .map(|u| {
                let path = u.layer_paths.first().ok_or_else(|| {
                    SweepError::Invalid(format!("{} lists no layers", u.utterance_id))
                })?;
                let (n_frames, _) = npy::read_array_shape(path)?;
                Ok(EmbeddingSequence {
                    utterance_id: u.utterance_id.clone(),
                    layer: 0,
                    frames: Array2::zeros((n_frames, 0)),
                    frame_stride_s: self.manifest.frame_stride_s,
                    frame_offset_s: self.manifest.frame_offset_s,
                })
            })
            .collect::<Result<Vec<_>, SweepError>>()?;
        self.build(&sequences)
    }

    /// Log-mel features in place of embeddings, as a single layer 0.
    pub fn fbank_dataset(&self) -> Result<FrameDataset, SweepError> {
        let utts = self.annotated_utterances();
        for u in &utts {
            self.audio_path(u)?;
        }
        let mut sequences = Vec::with_capacity(utts.len());
        for u in utts {
            let clip = read_wav(self.audio_path(u)?)?;
            let frames = log_mel(&clip, &self.config.mel)?;
            sequences.push(EmbeddingSequence {
                utterance_id: u.utterance_id.clone(),
                layer: 0,
                frames,
                frame_stride_s: self.config.mel.hop_s,
                frame_offset_s: self.config.mel.frame_offset_s(clip.sample_rate),
            });
        }
        // F0 targets live on the embedding grid; both grids share stride
        // and offset under the default front end.
        self.build(&sequences)
    }

    /// Fits and scores a single layer.
    pub fn fit_layer(&self, layer: usize) -> Result<LayerResult, SweepError> {
        let ctx = |e: SweepError| e.context(self.task.name, format!("layer {layer}"));
        let ds = self.dataset(layer).map_err(ctx)?;
        evaluate_dataset(&ds, &self.split, &self.config.solver).map_err(ctx)
    }

    pub fn sweep(&self) -> Result<LayerSweepResult, SweepError> {
        let layers = self.layers()?;
        let results = fan_out(&layers, |layer| self.fit_layer(layer))?;
        let best = best_layer(&results).expect("at least one layer");
        Ok(LayerSweepResult {
            model_name: self.manifest.model_name.clone(),
            task: self.task.clone(),
            split: self.split.clone(),
            layers: results,
            best_layer: best,
        })
    }

    pub fn baselines(&self) -> Result<BaselineResult, SweepError> {
        let flags = self.config.baselines;
        let mut out = BaselineResult::default();
        if flags.fbank {
            // fail before any fitting when audio is missing
            for u in self.annotated_utterances() {
                self.audio_path(u)?;
            }
        }
        if flags.random {
            let ctx = |e: SweepError| e.context(self.task.name, "random baseline");
            let ds = self.targets_only().map_err(ctx)?;
            let (train_idx, test_idx) = self.split.partition(&ds.speaker_ids)?;
            let train = ds.select(&train_idx);
            let test = ds.select(&test_idx);
            check_leakage(&train.speaker_ids, &test.speaker_ids)?;
            let prior = TrainingPrior::from_targets(&train.targets, self.task.n_classes())
                .map_err(|e| ctx(e.into()))?;
            let seed = self.config.solver.seed;
            out.random = Some(
                random_baseline(&self.task, &prior, &test.targets, seed, self.config.random_draws)
                    .map_err(|e| ctx(e.into()))?,
            );
            out.majority = Some(
                majority_baseline(&self.task, &prior, &test.targets).map_err(|e| ctx(e.into()))?,
            );
        }
        if flags.fbank {
            let ctx = |e: SweepError| e.context(self.task.name, "fbank baseline");
            let ds = self.fbank_dataset().map_err(ctx)?;
            out.fbank =
                Some(evaluate_dataset(&ds, &self.split, &self.config.solver).map_err(ctx)?);
        }
        Ok(out)
    }

    /// `output_dir/<model>/<task>`.
    pub fn run_dir(&self) -> PathBuf {
        run_dir(&self.config.output_dir, &self.manifest.model_name, self.task.name)
    }
}

/// Directory-safe form of a model name such as `org/model-base`.
pub fn sanitize_name(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn run_dir(output_dir: &Path, model_name: &str, task: TaskName) -> PathBuf {
    output_dir.join(sanitize_name(model_name)).join(task.to_string())
}

/// Loads, sweeps every configured layer and writes `sweep.csv`,
/// `best_layer.txt`, `split.json` and one model file per layer.
pub fn run_sweep(config: &RunConfig) -> Result<LayerSweepResult, SweepError> {
    let run = PreparedRun::new(config)?;
    let result = run.sweep()?;
    write_sweep(&run.run_dir(), &result)?;
    Ok(result)
}

/// Computes the configured baselines and writes `baselines.csv` (plus
/// `fbank.json` when the filterbank probe ran).
pub fn run_baselines(config: &RunConfig) -> Result<BaselineResult, SweepError> {
    let run = PreparedRun::new(config)?;
    let result = run.baselines()?;
    write_baselines(
        &run.run_dir(),
        &run.manifest.model_name,
        &run.task,
        &result,
    )?;
    Ok(result)
}

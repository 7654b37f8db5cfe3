//! Task construction: turning label spans and embedding sequences into
//! frame-level datasets.
//!
//! A frame belongs to a span when its center `i * stride + offset` lies in
//! the half-open interval `[start_s, end_s)`. Frames outside every span are
//! dropped.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{
    npy, pinyin_tone, AccentEvent, EmbeddingSequence, IngestError, LabelSpan,
};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("unknown {task} label {label:?}")]
    UnknownLabel { task: TaskName, label: String },
    #[error("no labelled frames for task {0}")]
    EmptyDataset(TaskName),
    #[error("spans overlap in utterance {utterance_id} at frame {frame}")]
    OverlappingSpans { utterance_id: String, frame: usize },
    #[error("sequences mix layers {0} and {1}")]
    MixedLayers(usize, usize),
    #[error("sequence dims differ: {0} vs {1}")]
    MixedDims(usize, usize),
    #[error("task {0} needs per-frame regression targets")]
    MissingTargets(TaskName),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskName {
    Stress,
    Accent,
    Tone,
    F0,
}

impl fmt::Display for TaskName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskName::Stress => "stress",
            TaskName::Accent => "accent",
            TaskName::Tone => "tone",
            TaskName::F0 => "f0",
        })
    }
}

impl FromStr for TaskName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "stress" => Ok(TaskName::Stress),
            "accent" => Ok(TaskName::Accent),
            "tone" => Ok(TaskName::Tone),
            "f0" => Ok(TaskName::F0),
            other => Err(format!("unknown task {other:?} (stress|accent|tone|f0)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Binary,
    Multiclass,
    Regression,
}

pub const STRESS: &str = "stress";
pub const NO_STRESS: &str = "no-stress";
pub const ACCENT: &str = "accent";
pub const NO_ACCENT: &str = "no-accent";

/// What a probing task predicts and how it is scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: TaskName,
    pub kind: TaskKind,
    /// Class names in class-index order; empty for regression.
    pub classes: Vec<String>,
    /// Class scored by binary F1.
    pub positive_class: Option<String>,
}

impl TaskSpec {
    pub fn new(name: TaskName) -> Self {
        match name {
            // Unstressed syllables are the minority class and are scored.
            TaskName::Stress => TaskSpec {
                name,
                kind: TaskKind::Binary,
                classes: vec![STRESS.into(), NO_STRESS.into()],
                positive_class: Some(NO_STRESS.into()),
            },
            TaskName::Accent => TaskSpec {
                name,
                kind: TaskKind::Binary,
                classes: vec![NO_ACCENT.into(), ACCENT.into()],
                positive_class: Some(ACCENT.into()),
            },
            TaskName::Tone => TaskSpec {
                name,
                kind: TaskKind::Multiclass,
                classes: (1..=5).map(|t| t.to_string()).collect(),
                positive_class: None,
            },
            TaskName::F0 => TaskSpec {
                name,
                kind: TaskKind::Regression,
                classes: Vec::new(),
                positive_class: None,
            },
        }
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn is_classification(&self) -> bool {
        self.kind != TaskKind::Regression
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    pub fn positive_index(&self) -> Option<usize> {
        self.positive_class.as_deref().and_then(|p| self.class_index(p))
    }
}

/// Indices of frames whose centers fall in `[start_s, end_s)`, clipped to
/// `0..n_frames`.
pub fn frames_for_span(
    start_s: f64,
    end_s: f64,
    frame_stride_s: f64,
    frame_offset_s: f64,
    n_frames: usize,
) -> Range<usize> {
    let center = |i: usize| i as f64 * frame_stride_s + frame_offset_s;
    let first_at_or_after = |t: f64| -> usize {
        let guess = ((t - frame_offset_s) / frame_stride_s).ceil();
        let mut i = if guess.is_finite() && guess > 0.0 {
            (guess as usize).min(n_frames)
        } else {
            0
        };
        // the division can land one frame off either way
        while i > 0 && center(i - 1) >= t {
            i -= 1;
        }
        while i < n_frames && center(i) < t {
            i += 1;
        }
        i
    };
    let lo = first_at_or_after(start_s);
    let hi = first_at_or_after(end_s).max(lo);
    lo..hi
}

/// Binarizes a raw `p`/`s`/`n` stress mark: primary is stressed, secondary
/// and unstressed are both unstressed.
pub fn collapse_stress(raw_label: &str) -> Result<&'static str, AlignError> {
    match raw_label.trim().to_ascii_lowercase().as_str() {
        "p" => Ok(STRESS),
        "s" | "n" => Ok(NO_STRESS),
        _ => Err(AlignError::UnknownLabel {
            task: TaskName::Stress,
            label: raw_label.to_string(),
        }),
    }
}

/// Result of spreading point accents over syllables.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadAccents {
    pub spans: Vec<LabelSpan>,
    /// Events that fell inside no syllable.
    pub dropped_events: usize,
}

/// Labels every syllable containing at least one accent time as accented.
pub fn spread_accents(events: &[AccentEvent], syllables: &[LabelSpan]) -> SpreadAccents {
    let mut by_utt: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, s) in syllables.iter().enumerate() {
        by_utt.entry(s.utterance_id.as_str()).or_default().push(i);
    }

    let mut accented = vec![false; syllables.len()];
    let mut dropped = 0;
    for ev in events {
        let hit = by_utt.get(ev.utterance_id.as_str()).and_then(|idx| {
            idx.iter()
                .copied()
                .find(|&i| syllables[i].contains(ev.time_s))
        });
        match hit {
            Some(i) => accented[i] = true,
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        log::warn!("{dropped} accent events fell outside every syllable");
    }

    let spans = syllables
        .iter()
        .zip(&accented)
        .map(|(s, &acc)| LabelSpan {
            label: if acc { ACCENT } else { NO_ACCENT }.to_string(),
            ..s.clone()
        })
        .collect();
    SpreadAccents {
        spans,
        dropped_events: dropped,
    }
}

/// Rewrites raw annotation labels into the task's class names.
///
/// Stress accepts raw `p`/`s`/`n` or already-collapsed labels; tone maps
/// numeric pinyin to `"1"`..`"5"`. Accent spans must come from
/// [`spread_accents`]; F0 spans keep their labels (only their extent matters).
pub fn prepare_spans(task: &TaskSpec, spans: &[LabelSpan]) -> Result<Vec<LabelSpan>, AlignError> {
    spans
        .iter()
        .map(|s| {
            let label = match task.name {
                TaskName::Stress => match s.label.as_str() {
                    STRESS | NO_STRESS => s.label.clone(),
                    raw => collapse_stress(raw)?.to_string(),
                },
                TaskName::Tone => pinyin_tone(&s.label)
                    .map_err(|_| AlignError::UnknownLabel {
                        task: task.name,
                        label: s.label.clone(),
                    })?
                    .to_string(),
                TaskName::Accent => {
                    if task.class_index(&s.label).is_none() {
                        return Err(AlignError::UnknownLabel {
                            task: task.name,
                            label: s.label.clone(),
                        });
                    }
                    s.label.clone()
                }
                TaskName::F0 => s.label.clone(),
            };
            Ok(LabelSpan { label, ..s.clone() })
        })
        .collect()
}

/// Per-row prediction targets.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Classes(Vec<usize>),
    Values(Vec<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes(c) => c.len(),
            Targets::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Classes(c) => Targets::Classes(idx.iter().map(|&i| c[i]).collect()),
            Targets::Values(v) => Targets::Values(idx.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// Frame-level examples for one task and layer, with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDataset {
    pub rows: Array2<f64>,
    pub targets: Targets,
    pub speaker_ids: Vec<String>,
    pub utterance_ids: Vec<String>,
    pub frame_indices: Vec<usize>,
    pub task: TaskSpec,
    pub layer: usize,
}

impl FrameDataset {
    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    /// Subset of rows, in the given order.
    pub fn select(&self, idx: &[usize]) -> FrameDataset {
        FrameDataset {
            rows: self.rows.select(Axis(0), idx),
            targets: self.targets.select(idx),
            speaker_ids: idx.iter().map(|&i| self.speaker_ids[i].clone()).collect(),
            utterance_ids: idx.iter().map(|&i| self.utterance_ids[i].clone()).collect(),
            frame_indices: idx.iter().map(|&i| self.frame_indices[i]).collect(),
            task: self.task.clone(),
            layer: self.layer,
        }
    }

    /// Row counts per class, in class-index order.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.task.n_classes()];
        if let Targets::Classes(c) = &self.targets {
            for &k in c {
                counts[k] += 1;
            }
        }
        counts
    }

    /// Writes rows as NPY and provenance as `<stem>.csv` next to it.
    pub fn dump(&self, npy_path: &Path) -> Result<(), AlignError> {
        npy::write_array_file(npy_path, &self.rows, npy::FloatDType::F4)?;
        let csv_path = npy_path.with_extension("csv");
        let io = |source| AlignError::Io {
            path: csv_path.clone(),
            source,
        };
        let mut out = std::io::BufWriter::new(std::fs::File::create(&csv_path).map_err(io)?);
        writeln!(out, "row,utterance_id,speaker_id,frame_index,label").map_err(io)?;
        for i in 0..self.len() {
            let label = match &self.targets {
                Targets::Classes(c) => self.task.classes[c[i]].clone(),
                Targets::Values(v) => v[i].to_string(),
            };
            writeln!(
                out,
                "{i},{},{},{},{label}",
                self.utterance_ids[i], self.speaker_ids[i], self.frame_indices[i]
            )
            .map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// Builds a classification dataset: every frame inside a span gets the
/// span's label. Spans must already carry task class names (see
/// [`prepare_spans`]).
pub fn build_frame_dataset(
    task: &TaskSpec,
    spans: &[LabelSpan],
    sequences: &[EmbeddingSequence],
) -> Result<FrameDataset, AlignError> {
    if !task.is_classification() {
        return Err(AlignError::MissingTargets(task.name));
    }
    let mut classes = Vec::new();
    build(task, spans, sequences, |span, _, _| {
        let k = task
            .class_index(&span.label)
            .ok_or_else(|| AlignError::UnknownLabel {
                task: task.name,
                label: span.label.clone(),
            })?;
        classes.push(k);
        Ok(true)
    })
    .map(|parts| parts.finish(task, Targets::Classes(classes)))
}

/// Builds a regression dataset from per-frame targets keyed by utterance.
/// Frames inside spans whose target is `None` (unvoiced) are excluded.
pub fn build_regression_dataset(
    task: &TaskSpec,
    spans: &[LabelSpan],
    sequences: &[EmbeddingSequence],
    frame_targets: &HashMap<String, Vec<Option<f64>>>,
) -> Result<FrameDataset, AlignError> {
    let mut values = Vec::new();
    build(task, spans, sequences, |span, _, frame| {
        let v = frame_targets
            .get(&span.utterance_id)
            .and_then(|t| t.get(frame).copied().flatten());
        if let Some(v) = v {
            values.push(v);
        }
        Ok(v.is_some())
    })
    .map(|parts| parts.finish(task, Targets::Values(values)))
}

struct Parts {
    rows: Vec<f64>,
    dim: usize,
    speaker_ids: Vec<String>,
    utterance_ids: Vec<String>,
    frame_indices: Vec<usize>,
    layer: usize,
}

impl Parts {
    fn finish(self, task: &TaskSpec, targets: Targets) -> FrameDataset {
        let n = self.frame_indices.len();
        FrameDataset {
            rows: Array2::from_shape_vec((n, self.dim), self.rows).expect("row buffer shape"),
            targets,
            speaker_ids: self.speaker_ids,
            utterance_ids: self.utterance_ids,
            frame_indices: self.frame_indices,
            task: task.clone(),
            layer: self.layer,
        }
    }
}

/// Walks sequences in utterance order and frames in index order, calling
/// `keep(span, sequence, frame)` for every frame inside a span.
fn build(
    task: &TaskSpec,
    spans: &[LabelSpan],
    sequences: &[EmbeddingSequence],
    mut keep: impl FnMut(&LabelSpan, &EmbeddingSequence, usize) -> Result<bool, AlignError>,
) -> Result<Parts, AlignError> {
    let (layer, dim) = match sequences.first() {
        Some(s) => (s.layer, s.dim()),
        None => return Err(AlignError::EmptyDataset(task.name)),
    };
    for s in sequences {
        if s.layer != layer {
            return Err(AlignError::MixedLayers(layer, s.layer));
        }
        if s.dim() != dim {
            return Err(AlignError::MixedDims(dim, s.dim()));
        }
    }

    let mut spans_by_utt: HashMap<&str, Vec<&LabelSpan>> = HashMap::new();
    for s in spans {
        spans_by_utt.entry(s.utterance_id.as_str()).or_default().push(s);
    }

    let mut order: Vec<&EmbeddingSequence> = sequences.iter().collect();
    order.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));

    let mut parts = Parts {
        rows: Vec::new(),
        dim,
        speaker_ids: Vec::new(),
        utterance_ids: Vec::new(),
        frame_indices: Vec::new(),
        layer,
    };
    for seq in order {
        let Some(utt_spans) = spans_by_utt.get(seq.utterance_id.as_str()) else {
            continue;
        };
        let n = seq.n_frames();
        let mut owner: Vec<Option<&LabelSpan>> = vec![None; n];
        for span in utt_spans {
            let range = frames_for_span(
                span.start_s,
                span.end_s,
                seq.frame_stride_s,
                seq.frame_offset_s,
                n,
            );
            for f in range {
                if owner[f].is_some() {
                    return Err(AlignError::OverlappingSpans {
                        utterance_id: seq.utterance_id.clone(),
                        frame: f,
                    });
                }
                owner[f] = Some(span);
            }
        }
        for (f, span) in owner.iter().enumerate() {
            let Some(span) = span else { continue };
            if keep(span, seq, f)? {
                parts.rows.extend(seq.frames.row(f).iter());
                parts.speaker_ids.push(span.speaker_id.clone());
                parts.utterance_ids.push(seq.utterance_id.clone());
                parts.frame_indices.push(f);
            }
        }
    }
    if parts.frame_indices.is_empty() {
        return Err(AlignError::EmptyDataset(task.name));
    }
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const STRIDE: f64 = 0.020;
    const OFFSET: f64 = 0.0125;

    fn seq(id: &str, n: usize, dim: usize) -> EmbeddingSequence {
        EmbeddingSequence {
            utterance_id: id.into(),
            layer: 3,
            frames: Array2::from_shape_fn((n, dim), |(i, j)| (i * 1000 + j) as f64),
            frame_stride_s: STRIDE,
            frame_offset_s: OFFSET,
        }
    }

    #[test]
    fn span_frames_follow_center_rule() {
        assert_eq!(frames_for_span(0.10, 0.20, STRIDE, OFFSET, 100), 5..10);
        assert!(frames_for_span(0.0, 0.010, STRIDE, OFFSET, 100).is_empty());
        // centers 0.0125 .. 0.9925 are all < 1.0
        assert_eq!(frames_for_span(0.0, 1.0, STRIDE, OFFSET, 50), 0..50);
        assert_eq!(frames_for_span(0.0, 1.0, STRIDE, OFFSET, 49), 0..49);
    }

    #[test]
    fn span_past_end_is_truncated() {
        assert_eq!(frames_for_span(0.9, 1.5, STRIDE, OFFSET, 49), 45..49);
        assert!(frames_for_span(2.0, 3.0, STRIDE, OFFSET, 49).is_empty());
    }

    #[test]
    fn stress_collapse() {
        assert_eq!(collapse_stress("p").unwrap(), STRESS);
        assert_eq!(collapse_stress("s").unwrap(), NO_STRESS);
        assert_eq!(collapse_stress("n").unwrap(), NO_STRESS);
        assert!(matches!(
            collapse_stress("x"),
            Err(AlignError::UnknownLabel { .. })
        ));
    }

    #[test]
    fn accent_containment() {
        let syl = vec![
            LabelSpan::new("u", "s", 0.10, 0.20, "x"),
            LabelSpan::new("u", "s", 0.20, 0.30, "x"),
        ];
        let ev = vec![AccentEvent {
            utterance_id: "u".into(),
            time_s: 0.15,
        }];
        let out = spread_accents(&ev, &syl);
        assert_eq!(out.spans[0].label, ACCENT);
        assert_eq!(out.spans[1].label, NO_ACCENT);
        assert_eq!(out.dropped_events, 0);
    }

    #[test]
    fn accent_on_boundary_goes_to_later_syllable() {
        let syl = vec![
            LabelSpan::new("u", "s", 0.10, 0.20, "x"),
            LabelSpan::new("u", "s", 0.20, 0.30, "x"),
        ];
        let ev = vec![AccentEvent {
            utterance_id: "u".into(),
            time_s: 0.20,
        }];
        let out = spread_accents(&ev, &syl);
        assert_eq!(out.spans[0].label, NO_ACCENT);
        assert_eq!(out.spans[1].label, ACCENT);
    }

    #[test]
    fn no_events_no_accents_and_stray_events_dropped() {
        let syl = vec![LabelSpan::new("u", "s", 0.10, 0.20, "x")];
        let out = spread_accents(&[], &syl);
        assert!(out.spans.iter().all(|s| s.label == NO_ACCENT));
        let stray = vec![AccentEvent {
            utterance_id: "u".into(),
            time_s: 0.5,
        }];
        assert_eq!(spread_accents(&stray, &syl).dropped_events, 1);
    }

    #[test]
    fn tone_labels_from_pinyin() {
        let task = TaskSpec::new(TaskName::Tone);
        let spans = vec![
            LabelSpan::new("u", "s", 0.0, 0.1, "ma3"),
            LabelSpan::new("u", "s", 0.1, 0.2, "de"),
        ];
        let out = prepare_spans(&task, &spans).unwrap();
        assert_eq!(out[0].label, "3");
        assert_eq!(out[1].label, "5");
    }

    #[test]
    fn one_span_five_rows() {
        let task = TaskSpec::new(TaskName::Stress);
        let spans = vec![LabelSpan::new("u", "s", 0.10, 0.20, STRESS)];
        let ds = build_frame_dataset(&task, &spans, &[seq("u", 50, 768)]).unwrap();
        assert_eq!(ds.len(), 5);
        assert_eq!(ds.dim(), 768);
        assert_eq!(ds.frame_indices, vec![5, 6, 7, 8, 9]);
        assert_eq!(ds.rows[[0, 1]], 5001.0);
        assert_eq!(ds.layer, 3);
    }

    #[test]
    fn adjacent_spans_partition_frames() {
        let task = TaskSpec::new(TaskName::Stress);
        let spans = vec![
            LabelSpan::new("u", "s", 0.10, 0.20, STRESS),
            LabelSpan::new("u", "s", 0.20, 0.30, NO_STRESS),
        ];
        let ds = build_frame_dataset(&task, &spans, &[seq("u", 50, 4)]).unwrap();
        assert_eq!(ds.len(), 10);
        assert_eq!(ds.class_counts(), vec![5, 5]);
    }

    #[test]
    fn overlapping_spans_rejected() {
        let task = TaskSpec::new(TaskName::Stress);
        let spans = vec![
            LabelSpan::new("u", "s", 0.10, 0.25, STRESS),
            LabelSpan::new("u", "s", 0.20, 0.30, NO_STRESS),
        ];
        assert!(matches!(
            build_frame_dataset(&task, &spans, &[seq("u", 50, 4)]),
            Err(AlignError::OverlappingSpans { .. })
        ));
    }

    #[test]
    fn empty_dataset_error() {
        let task = TaskSpec::new(TaskName::Stress);
        let spans = vec![LabelSpan::new("u", "s", 0.0, 0.01, STRESS)];
        assert!(matches!(
            build_frame_dataset(&task, &spans, &[seq("u", 50, 4)]),
            Err(AlignError::EmptyDataset(TaskName::Stress))
        ));
    }

    #[test]
    fn foreign_label_rejected() {
        let task = TaskSpec::new(TaskName::Stress);
        let spans = vec![LabelSpan::new("u", "s", 0.1, 0.2, "p")];
        assert!(matches!(
            build_frame_dataset(&task, &spans, &[seq("u", 50, 4)]),
            Err(AlignError::UnknownLabel { .. })
        ));
    }

    #[test]
    fn regression_skips_unvoiced() {
        let task = TaskSpec::new(TaskName::F0);
        let spans = vec![LabelSpan::new("u", "s", 0.0, 0.2, "word")];
        let mut targets = HashMap::new();
        let mut t = vec![None; 10];
        t[..4].iter_mut().for_each(|v| *v = Some(120.0));
        targets.insert("u".to_string(), t);
        let ds = build_regression_dataset(&task, &spans, &[seq("u", 10, 2)], &targets).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.targets, Targets::Values(vec![120.0; 4]));
    }

    #[test]
    fn dump_writes_rows_and_provenance() {
        let task = TaskSpec::new(TaskName::Stress);
        let spans = vec![LabelSpan::new("u", "s", 0.10, 0.20, STRESS)];
        let ds = build_frame_dataset(&task, &spans, &[seq("u", 50, 3)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ds.npy");
        ds.dump(&p).unwrap();
        assert_eq!(npy::read_array_file(&p).unwrap().dim(), (5, 3));
        let csv = std::fs::read_to_string(p.with_extension("csv")).unwrap();
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.lines().nth(1).unwrap().ends_with("u,s,5,stress"));
    }

    proptest! {
        #[test]
        fn rows_lie_inside_their_span(
            cuts in proptest::collection::vec(0.0f64..2.0, 2..12),
            n_frames in 1usize..120,
        ) {
            let mut cuts = cuts;
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            prop_assume!(cuts.len() >= 2);
            let spans: Vec<LabelSpan> = cuts
                .windows(2)
                .enumerate()
                .map(|(i, w)| LabelSpan::new("u", "s", w[0], w[1], if i % 2 == 0 { STRESS } else { NO_STRESS }))
                .collect();
            let task = TaskSpec::new(TaskName::Stress);
            let sequences = [seq("u", n_frames, 2)];
            match build_frame_dataset(&task, &spans, &sequences) {
                Ok(ds) => {
                    let mut seen = std::collections::HashSet::new();
                    for r in 0..ds.len() {
                        let f = ds.frame_indices[r];
                        prop_assert!(seen.insert(f), "frame {} used twice", f);
                        let c = f as f64 * STRIDE + OFFSET;
                        let Targets::Classes(cl) = &ds.targets else { unreachable!() };
                        let owner = spans.iter().find(|s| s.contains(c));
                        prop_assert!(owner.is_some());
                        prop_assert_eq!(task.class_index(&owner.unwrap().label), Some(cl[r]));
                    }
                    let again = build_frame_dataset(&task, &spans, &sequences).unwrap();
                    prop_assert_eq!(ds, again);
                }
                Err(AlignError::EmptyDataset(_)) => {}
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }
}

//! Speaker splits, metrics and baselines.

use std::collections::BTreeSet;
use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{TaskKind, TaskSpec, Targets};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("need at least 2 speakers to split, got {0}")]
    TooFewSpeakers(usize),
    #[error("split ratio {0} outside (0, 1)")]
    InvalidRatio(f64),
    #[error("positive class {0:?} is not one of the task classes")]
    UnknownPositiveClass(String),
    #[error("label {label} outside 0..{n_classes}")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("{truth} true labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("nothing to score")]
    Empty,
    #[error("R² needs at least 2 examples")]
    TooFewExamples,
    #[error("target is constant, R² undefined")]
    ConstantTarget,
    #[error("invalid training prior: {0}")]
    InvalidPrior(String),
    #[error("speaker {0:?} appears in both train and test")]
    SpeakerLeakage(String),
    #[error("speaker {0:?} is in neither split")]
    UnassignedSpeaker(String),
    #[error("targets do not match the task kind")]
    TargetKind,
}

/// Which speakers train and which are held out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    /// Sorted.
    pub train_speakers: Vec<String>,
    /// Sorted.
    pub test_speakers: Vec<String>,
    pub ratio: f64,
    pub seed: u64,
}

/// Speaker-disjoint train/test split.
///
/// Distinct speakers are sorted, shuffled with a ChaCha8 generator seeded by
/// `seed`, and the first `⌈ratio · n⌉` go to training. The count is clamped
/// to `1..=n-1` so both sides always hold a speaker.
pub fn speaker_split<S: AsRef<str>>(
    speakers: &[S],
    ratio: f64,
    seed: u64,
) -> Result<SplitAssignment, EvalError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(EvalError::InvalidRatio(ratio));
    }
    let unique: BTreeSet<&str> = speakers.iter().map(|s| s.as_ref()).collect();
    let n = unique.len();
    if n < 2 {
        return Err(EvalError::TooFewSpeakers(n));
    }
    let mut order: Vec<&str> = unique.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // guard against 0.8 * 10 = 8.000000000000002
    let n_train = ((ratio * n as f64 - 1e-9).ceil() as usize).clamp(1, n - 1);

    let mut train_speakers: Vec<String> = order[..n_train].iter().map(|s| s.to_string()).collect();
    let mut test_speakers: Vec<String> = order[n_train..].iter().map(|s| s.to_string()).collect();
    train_speakers.sort();
    test_speakers.sort();
    Ok(SplitAssignment {
        train_speakers,
        test_speakers,
        ratio,
        seed,
    })
}

impl SplitAssignment {
    pub fn is_train(&self, speaker: &str) -> bool {
        self.train_speakers.binary_search_by(|s| s.as_str().cmp(speaker)).is_ok()
    }

    pub fn is_test(&self, speaker: &str) -> bool {
        self.test_speakers.binary_search_by(|s| s.as_str().cmp(speaker)).is_ok()
    }

    /// Fails on the first speaker listed on both sides.
    pub fn check_disjoint(&self) -> Result<(), EvalError> {
        match self.train_speakers.iter().find(|s| self.is_test(s)) {
            Some(s) => Err(EvalError::SpeakerLeakage(s.clone())),
            None => Ok(()),
        }
    }

    /// Row indices whose speaker trains and row indices whose speaker is
    /// held out. Every row must belong to some split.
    pub fn partition<S: AsRef<str>>(
        &self,
        row_speakers: &[S],
    ) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, s) in row_speakers.iter().enumerate() {
            let s = s.as_ref();
            let (a, b) = (self.is_train(s), self.is_test(s));
            if !a && !b {
                return Err(EvalError::UnassignedSpeaker(s.to_string()));
            }
            if a {
                train.push(i);
            }
            if b {
                test.push(i);
            }
        }
        Ok((train, test))
    }
}

/// Verifies that no speaker contributes rows to both sides of a split.
pub fn check_leakage<S: AsRef<str>>(train: &[S], test: &[S]) -> Result<(), EvalError> {
    let train: BTreeSet<&str> = train.iter().map(|s| s.as_ref()).collect();
    let mut test: Vec<&str> = test.iter().map(|s| s.as_ref()).collect();
    test.sort();
    match test.into_iter().find(|s| train.contains(s)) {
        Some(s) => Err(EvalError::SpeakerLeakage(s.to_string())),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    F1,
    MacroF1,
    R2,
}

impl Metric {
    pub fn for_task(kind: TaskKind) -> Metric {
        match kind {
            TaskKind::Binary => Metric::F1,
            TaskKind::Multiclass => Metric::MacroF1,
            TaskKind::Regression => Metric::R2,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::F1 => "f1",
            Metric::MacroF1 => "macro_f1",
            Metric::R2 => "r2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True examples of this class.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub metric: Metric,
    pub value: f64,
    /// Empty for regression.
    pub per_class: Vec<ClassScore>,
    pub n: usize,
}

fn check_labels(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<(), EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch {
            truth: y_true.len(),
            pred: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(EvalError::Empty);
    }
    match y_true.iter().chain(y_pred).find(|&&l| l >= n_classes) {
        Some(&label) => Err(EvalError::LabelOutOfRange { label, n_classes }),
        None => Ok(()),
    }
}

/// Precision, recall and F1 of every class, 0 wherever a ratio is 0/0.
fn class_scores(y_true: &[usize], y_pred: &[usize], classes: &[String]) -> Vec<ClassScore> {
    let k = classes.len();
    let (mut tp, mut fp, mut fn_) = (vec![0usize; k], vec![0usize; k], vec![0usize; k]);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (0..k)
        .map(|c| {
            let precision = ratio(tp[c], tp[c] + fp[c]);
            let recall = ratio(tp[c], tp[c] + fn_[c]);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassScore {
                class: classes[c].clone(),
                precision,
                recall,
                f1,
                support: tp[c] + fn_[c],
            }
        })
        .collect()
}

/// F1 of the declared positive class.
pub fn f1_binary(
    y_true: &[usize],
    y_pred: &[usize],
    classes: &[String],
    positive_class: &str,
) -> Result<ScoreReport, EvalError> {
    let pos = classes
        .iter()
        .position(|c| c == positive_class)
        .ok_or_else(|| EvalError::UnknownPositiveClass(positive_class.to_string()))?;
    check_labels(y_true, y_pred, classes.len())?;
    let per_class = class_scores(y_true, y_pred, classes);
    Ok(ScoreReport {
        metric: Metric::F1,
        value: per_class[pos].f1,
        per_class,
        n: y_true.len(),
    })
}

/// Unweighted mean of per-class F1 over the declared class list.
pub fn f1_macro(
    y_true: &[usize],
    y_pred: &[usize],
    classes: &[String],
) -> Result<ScoreReport, EvalError> {
    check_labels(y_true, y_pred, classes.len())?;
    let per_class = class_scores(y_true, y_pred, classes);
    let value = per_class.iter().map(|c| c.f1).sum::<f64>() / classes.len() as f64;
    Ok(ScoreReport {
        metric: Metric::MacroF1,
        value,
        per_class,
        n: y_true.len(),
    })
}

/// `1 − SS_res / SS_tot`.
pub fn r_squared(y_true: &[f64], y_pred: &[f64]) -> Result<ScoreReport, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch {
            truth: y_true.len(),
            pred: y_pred.len(),
        });
    }
    let n = y_true.len();
    if n < 2 {
        return Err(EvalError::TooFewExamples);
    }
    let mean = y_true.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y_true.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(EvalError::ConstantTarget);
    }
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).powi(2)).sum();
    Ok(ScoreReport {
        metric: Metric::R2,
        value: 1.0 - ss_res / ss_tot,
        per_class: Vec::new(),
        n,
    })
}

/// Scores predictions with the task's metric.
pub fn score(task: &TaskSpec, y_true: &Targets, y_pred: &Targets) -> Result<ScoreReport, EvalError> {
    match (task.kind, y_true, y_pred) {
        (TaskKind::Binary, Targets::Classes(t), Targets::Classes(p)) => {
            let pos = task
                .positive_class
                .as_deref()
                .ok_or_else(|| EvalError::UnknownPositiveClass(String::new()))?;
            f1_binary(t, p, &task.classes, pos)
        }
        (TaskKind::Multiclass, Targets::Classes(t), Targets::Classes(p)) => {
            f1_macro(t, p, &task.classes)
        }
        (TaskKind::Regression, Targets::Values(t), Targets::Values(p)) => r_squared(t, p),
        _ => Err(EvalError::TargetKind),
    }
}

/// What a baseline knows about the training split.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainingPrior {
    /// Class probabilities in class-index order, summing to 1.
    Classes(Vec<f64>),
    /// Empirical training targets, resampled with replacement.
    Values(Vec<f64>),
}

impl TrainingPrior {
    pub fn from_targets(targets: &Targets, n_classes: usize) -> Result<Self, EvalError> {
        match targets {
            Targets::Classes(c) => {
                if c.is_empty() {
                    return Err(EvalError::Empty);
                }
                let mut counts = vec![0usize; n_classes];
                for &k in c {
                    if k >= n_classes {
                        return Err(EvalError::LabelOutOfRange {
                            label: k,
                            n_classes,
                        });
                    }
                    counts[k] += 1;
                }
                let n = c.len() as f64;
                Ok(TrainingPrior::Classes(
                    counts.into_iter().map(|k| k as f64 / n).collect(),
                ))
            }
            Targets::Values(v) if v.is_empty() => Err(EvalError::Empty),
            Targets::Values(v) => Ok(TrainingPrior::Values(v.clone())),
        }
    }

    fn validate(&self, task: &TaskSpec) -> Result<(), EvalError> {
        match self {
            TrainingPrior::Classes(p) => {
                if p.len() != task.n_classes() {
                    return Err(EvalError::InvalidPrior(format!(
                        "{} probabilities for {} classes",
                        p.len(),
                        task.n_classes()
                    )));
                }
                if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(EvalError::InvalidPrior("negative or non-finite".into()));
                }
                let total: f64 = p.iter().sum();
                if (total - 1.0).abs() > 1e-6 {
                    return Err(EvalError::InvalidPrior(format!("sums to {total}")));
                }
                Ok(())
            }
            TrainingPrior::Values(v) if v.is_empty() => Err(EvalError::Empty),
            TrainingPrior::Values(_) => Ok(()),
        }
    }
}

/// Mean task metric over `n_draws` sets of labels drawn i.i.d. from the
/// training prior. Per-class figures are averaged across draws too.
pub fn random_baseline(
    task: &TaskSpec,
    prior: &TrainingPrior,
    y_true: &Targets,
    seed: u64,
    n_draws: usize,
) -> Result<ScoreReport, EvalError> {
    prior.validate(task)?;
    if n_draws == 0 || y_true.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = y_true.len();
    let mut total: Option<ScoreReport> = None;
    for _ in 0..n_draws {
        let draw = match prior {
            TrainingPrior::Classes(p) => {
                let dist = WeightedIndex::new(p)
                    .map_err(|e| EvalError::InvalidPrior(e.to_string()))?;
                Targets::Classes((0..n).map(|_| dist.sample(&mut rng)).collect())
            }
            TrainingPrior::Values(v) => {
                Targets::Values((0..n).map(|_| v[rng.random_range(0..v.len())]).collect())
            }
        };
        let r = score(task, y_true, &draw)?;
        total = Some(match total {
            None => r,
            Some(mut acc) => {
                acc.value += r.value;
                for (a, b) in acc.per_class.iter_mut().zip(&r.per_class) {
                    a.precision += b.precision;
                    a.recall += b.recall;
                    a.f1 += b.f1;
                }
                acc
            }
        });
    }
    let mut out = total.expect("n_draws > 0");
    let k = n_draws as f64;
    out.value /= k;
    for c in &mut out.per_class {
        c.precision /= k;
        c.recall /= k;
        c.f1 /= k;
    }
    Ok(out)
}

/// Always predicts the most frequent training class (lowest index on ties),
/// or the training mean for regression.
pub fn majority_baseline(
    task: &TaskSpec,
    prior: &TrainingPrior,
    y_true: &Targets,
) -> Result<ScoreReport, EvalError> {
    prior.validate(task)?;
    let n = y_true.len();
    let pred = match prior {
        TrainingPrior::Classes(p) => {
            let mut best = 0;
            for (c, v) in p.iter().enumerate() {
                if *v > p[best] {
                    best = c;
                }
            }
            Targets::Classes(vec![best; n])
        }
        TrainingPrior::Values(v) => {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            Targets::Values(vec![mean; n])
        }
    };
    score(task, y_true, &pred)
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BaselineResult, LayerSweepResult, SweepError};
use crate::align::TaskSpec;
use crate::eval::Metric;

/// One line of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: String,
    pub task: String,
    pub layer: usize,
    pub metric: String,
    pub value: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub epochs_run: usize,
    pub converged: bool,
    pub final_objective: f64,
}

/// One line of `baselines.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub model: String,
    pub task: String,
    pub baseline: String,
    pub metric: String,
    pub value: f64,
}

/// One line of a report CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub task: String,
    pub layer: usize,
    pub metric: String,
    pub value: f64,
    pub is_best: bool,
    pub baseline_random: Option<f64>,
    pub baseline_fbank: Option<f64>,
}

fn create_dir(dir: &Path) -> Result<(), SweepError> {
    fs::create_dir_all(dir).map_err(|e| SweepError::io(dir, e))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), SweepError> {
    let err = |source| SweepError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| SweepError::io(path, e))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, SweepError> {
    let err = |source| SweepError::Csv {
        path: path.to_path_buf(),
        source,
    };
    csv::Reader::from_path(path)
        .map_err(err)?
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(err)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SweepError> {
    let text = serde_json::to_string_pretty(value).expect("plain data serializes");
    fs::write(path, text + "\n").map_err(|e| SweepError::io(path, e))
}

pub fn read_sweep_rows(path: &Path) -> Result<Vec<SweepRow>, SweepError> {
    read_csv(path)
}

/// Writes `sweep.csv`, `best_layer.txt`, `split.json` and `layer_NN.json`.
pub fn write_sweep(dir: &Path, result: &LayerSweepResult) -> Result<(), SweepError> {
    create_dir(dir)?;
    let rows: Vec<SweepRow> = result
        .layers
        .iter()
        .map(|r| {
            let d = &r.probe.model.diagnostics;
            SweepRow {
                model: result.model_name.clone(),
                task: result.task.name.to_string(),
                layer: r.layer,
                metric: r.score.metric.to_string(),
                value: r.score.value,
                n_train: r.n_train,
                n_test: r.n_test,
                epochs_run: d.epochs_run,
                converged: d.converged,
                final_objective: d.final_objective,
            }
        })
        .collect();
    write_csv(&dir.join("sweep.csv"), &rows)?;
    let best = dir.join("best_layer.txt");
    fs::write(&best, format!("{}\n", result.best_layer)).map_err(|e| SweepError::io(&best, e))?;
    write_json(&dir.join("split.json"), &result.split)?;
    for r in &result.layers {
        r.probe.save(&dir.join(format!("layer_{:02}.json", r.layer)))?;
    }
    Ok(())
}

/// Writes `baselines.csv` and, if present, the filterbank probe as
/// `fbank.json`.
pub fn write_baselines(
    dir: &Path,
    model_name: &str,
    task: &TaskSpec,
    result: &BaselineResult,
) -> Result<(), SweepError> {
    create_dir(dir)?;
    let metric = Metric::for_task(task.kind).to_string();
    let row = |baseline: &str, value: f64| BaselineRow {
        model: model_name.to_string(),
        task: task.name.to_string(),
        baseline: baseline.to_string(),
        metric: metric.clone(),
        value,
    };
    let mut rows = Vec::new();
    if let Some(r) = &result.random {
        rows.push(row("random", r.value));
    }
    if let Some(r) = &result.majority {
        rows.push(row("majority", r.value));
    }
    if let Some(r) = &result.fbank {
        rows.push(row("fbank", r.score.value));
        r.probe.save(&dir.join("fbank.json"))?;
    }
    write_csv(&dir.join("baselines.csv"), &rows)
}

fn find_sweeps(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), SweepError> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| SweepError::io(dir, e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(|e| SweepError::io(dir, e))?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_sweeps(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == "sweep.csv") {
            out.push(p);
        }
    }
    Ok(())
}

/// Collects every `sweep.csv` under `results_dir` (with any sibling
/// `baselines.csv`) into one long-form `report_<task>.csv` per task.
/// Returns the written paths.
pub fn report(results_dir: &Path) -> Result<Vec<PathBuf>, SweepError> {
    let mut sweeps = Vec::new();
    if results_dir.is_dir() {
        find_sweeps(results_dir, &mut sweeps)?;
    }
    if sweeps.is_empty() {
        return Err(SweepError::NoResults(results_dir.to_path_buf()));
    }

    let mut by_task: BTreeMap<String, Vec<ReportRow>> = BTreeMap::new();
    for path in &sweeps {
        let rows = read_sweep_rows(path)?;
        if rows.is_empty() {
            continue;
        }
        let baselines_path = path.with_file_name("baselines.csv");
        let baselines: Vec<BaselineRow> = if baselines_path.exists() {
            read_csv(&baselines_path)?
        } else {
            Vec::new()
        };
        let lookup = |name: &str| baselines.iter().find(|b| b.baseline == name).map(|b| b.value);
        let (random, fbank) = (lookup("random"), lookup("fbank"));

        // argmax, lowest layer on ties
        let mut best = &rows[0];
        for r in &rows[1..] {
            if r.value > best.value || (r.value == best.value && r.layer < best.layer) {
                best = r;
            }
        }
        let best_layer = best.layer;
        for r in &rows {
            by_task.entry(r.task.clone()).or_default().push(ReportRow {
                model: r.model.clone(),
                task: r.task.clone(),
                layer: r.layer,
                metric: r.metric.clone(),
                value: r.value,
                is_best: r.layer == best_layer,
                baseline_random: random,
                baseline_fbank: fbank,
            });
        }
    }
    if by_task.is_empty() {
        return Err(SweepError::NoResults(results_dir.to_path_buf()));
    }

    let mut written = Vec::new();
    for (task, mut rows) in by_task {
        rows.sort_by(|a, b| a.model.cmp(&b.model).then(a.layer.cmp(&b.layer)));
        let path = results_dir.join(format!("report_{task}.csv"));
        write_csv(&path, &rows)?;
        written.push(path);
    }
    Ok(written)
}

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::SweepError;
use crate::dsp::{autocorr_f0, log_mel, F0Params, F0Track, MelSpec};
use crate::ingest::{npy, read_wav, Manifest, UtteranceEntry};

#[derive(Serialize)]
struct F0Row<'a> {
    utterance_id: &'a str,
    frame: usize,
    time_s: f64,
    f0_hz: Option<f64>,
    strength: f64,
}

fn audio(utt: &UtteranceEntry) -> Result<&Path, SweepError> {
    utt.audio_path
        .as_deref()
        .ok_or_else(|| SweepError::MissingAudio(utt.utterance_id.clone()))
}

/// Tracks F0 for every utterance and writes one CSV with columns
/// `utterance_id,frame,time_s,f0_hz,strength` (blank `f0_hz` = unvoiced).
pub fn extract_f0(
    manifest: &Manifest,
    params: &F0Params,
    out_csv: &Path,
) -> Result<Vec<F0Track>, SweepError> {
    let mut tracks = Vec::with_capacity(manifest.utterances.len());
    for utt in &manifest.utterances {
        let clip = read_wav(audio(utt)?)?;
        tracks.push(autocorr_f0(&clip, params)?);
    }
    if let Some(dir) = out_csv.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| SweepError::io(dir, e))?;
    }
    let err = |source| SweepError::Csv {
        path: out_csv.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(out_csv).map_err(err)?;
    for t in &tracks {
        for (i, (&time_s, (&f0_hz, &strength))) in t
            .frame_times_s
            .iter()
            .zip(t.f0_hz.iter().zip(&t.strengths))
            .enumerate()
        {
            w.serialize(F0Row {
                utterance_id: &t.utterance_id,
                frame: i,
                time_s,
                f0_hz,
                strength,
            })
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| SweepError::io(out_csv, e))?;
    Ok(tracks)
}

/// Computes log-mel features for every utterance into `out_dir/<id>.npy`
/// and writes `out_dir/manifest.json` describing them as a one-layer
/// model, so the filterbank can be swept like any embedding model.
pub fn extract_fbank(
    manifest: &Manifest,
    mel: &MelSpec,
    out_dir: &Path,
) -> Result<Manifest, SweepError> {
    fs::create_dir_all(out_dir).map_err(|e| SweepError::io(out_dir, e))?;
    let mut utterances = Vec::with_capacity(manifest.utterances.len());
    let mut offset = mel.frame_offset_s(crate::ingest::SAMPLE_RATE);
    for utt in &manifest.utterances {
        let clip = read_wav(audio(utt)?)?;
        offset = mel.frame_offset_s(clip.sample_rate);
        let feats = log_mel(&clip, mel)?;
        let name = format!("{}.npy", utt.utterance_id);
        npy::write_array_file(out_dir.join(&name), &feats, npy::FloatDType::F4)?;
        utterances.push(UtteranceEntry {
            layer_paths: vec![PathBuf::from(name)],
            ..utt.clone()
        });
    }
    let out = Manifest {
        model_name: "fbank".to_string(),
        n_layers: 1,
        dim: mel.n_mels,
        frame_stride_s: mel.hop_s,
        frame_offset_s: offset,
        utterances,
    };
    let path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&out).expect("plain data serializes");
    fs::write(&path, text + "\n").map_err(|e| SweepError::io(&path, e))?;
    Ok(out)
}

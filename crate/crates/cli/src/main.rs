use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use prosody_probe::dsp::{F0Params, MelSpec};
use prosody_probe::ingest::read_manifest;
use prosody_probe::sweep::{
    extract_f0, extract_fbank, report, write_baselines, write_sweep, BaselineResult,
    LayerResult, LayerSweepResult, PreparedRun, RunConfig,
};

/// Layer-wise linear probing of speech-model embeddings.
#[derive(Parser)]
#[command(name = "prosody-probe", version)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build one layer's frame dataset and dump it as NPY plus a provenance CSV.
    Align {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0)]
        layer: usize,
        /// Output NPY path; the CSV goes next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Track F0 for every utterance with audio and write one CSV.
    F0 {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute log-mel features and a one-layer manifest describing them.
    Fbank {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit and score a single layer.
    Fit {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        layer: usize,
    },
    /// Probe every configured layer, then run the configured baselines.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Random, majority and filterbank baselines only.
    Baseline {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Gather sweep results under a directory into per-task report CSVs.
    Report {
        /// Defaults to the config's output_dir.
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// A JSON config file plus command-line overrides for any of its fields.
#[derive(Args, Clone, Default)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long)]
    accent_events: Option<PathBuf>,
    /// stress, accent, tone or f0.
    #[arg(long)]
    task: Option<String>,
    /// Comma-separated layer list.
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<usize>>,
    #[arg(long = "C")]
    c: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    split_ratio: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    random_baseline: Option<bool>,
    #[arg(long)]
    fbank_baseline: Option<bool>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    f0_floor: Option<f64>,
    #[arg(long)]
    f0_ceiling: Option<f64>,
    #[arg(long)]
    n_mels: Option<usize>,
}

fn set(v: &mut Value, path: &[&str], new: Value) {
    let mut cur = v;
    for key in &path[..path.len() - 1] {
        let obj = cur.as_object_mut().expect("config is a JSON object");
        cur = obj.entry(*key).or_insert_with(|| Value::Object(Map::new()));
    }
    cur.as_object_mut()
        .expect("config is a JSON object")
        .insert(path[path.len() - 1].to_string(), new);
}

impl RunArgs {
    /// Config file (if any) with every given flag applied on top.
    fn to_value(&self) -> Result<Value> {
        let mut v = match &self.config {
            Some(p) => serde_json::to_value(RunConfig::load(p)?)?,
            None => json!({}),
        };
        macro_rules! put {
            ($field:expr, $path:expr) => {
                if let Some(x) = &$field {
                    set(&mut v, $path, serde_json::to_value(x)?);
                }
            };
        }
        put!(self.manifest, &["manifest_path"]);
        put!(self.annotations, &["annotations_path"]);
        put!(self.accent_events, &["accent_events_path"]);
        put!(self.task.as_ref().map(|t| t.to_ascii_lowercase()), &["task"]);
        put!(self.layers, &["layers"]);
        put!(self.c, &["solver", "C"]);
        put!(self.threshold, &["solver", "threshold"]);
        put!(self.max_epochs, &["solver", "max_epochs"]);
        put!(self.tol, &["solver", "tol"]);
        put!(self.seed, &["solver", "seed"]);
        put!(self.split_ratio, &["split", "ratio"]);
        put!(self.split_seed, &["split", "seed"]);
        put!(self.random_baseline, &["baselines", "random"]);
        put!(self.fbank_baseline, &["baselines", "fbank"]);
        put!(self.output_dir, &["output_dir"]);
        Ok(v)
    }

    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg: RunConfig = serde_json::from_value(self.to_value()?)
            .context("incomplete run config (pass --config or the missing flags)")?;
        self.apply_dsp(&mut cfg.f0, &mut cfg.mel);
        Ok(cfg)
    }

    fn apply_dsp(&self, f0: &mut F0Params, mel: &mut MelSpec) {
        if let Some(v) = self.f0_floor {
            f0.floor_hz = v;
        }
        if let Some(v) = self.f0_ceiling {
            f0.ceil_hz = v;
        }
        if let Some(v) = self.n_mels {
            mel.n_mels = v;
        }
    }

    /// Manifest path and DSP settings only, for the extraction commands.
    fn extraction(&self) -> Result<(PathBuf, F0Params, MelSpec)> {
        let v = self.to_value()?;
        let manifest = v
            .get("manifest_path")
            .and_then(Value::as_str)
            .map(PathBuf::from)
            .context("no manifest (pass --manifest or --config)")?;
        let mut f0: F0Params = match v.get("f0") {
            Some(x) => serde_json::from_value(x.clone())?,
            None => F0Params::default(),
        };
        let mut mel: MelSpec = match v.get("mel") {
            Some(x) => serde_json::from_value(x.clone())?,
            None => MelSpec::default(),
        };
        self.apply_dsp(&mut f0, &mut mel);
        Ok((manifest, f0, mel))
    }
}

fn print_layer(r: &LayerResult) {
    let d = &r.probe.model.diagnostics;
    println!(
        "layer {:>2}  {} {:.4}  train {:>6}  test {:>6}  epochs {:>3}{}",
        r.layer,
        r.score.metric,
        r.score.value,
        r.n_train,
        r.n_test,
        d.epochs_run,
        if d.converged { "" } else { "  (not converged)" }
    );
}

fn print_sweep(res: &LayerSweepResult) {
    println!("{} / {}", res.model_name, res.task.name);
    for r in &res.layers {
        print_layer(r);
    }
    println!("best layer: {}", res.best_layer);
}

fn print_baselines(b: &BaselineResult) {
    if let Some(r) = &b.random {
        println!("baseline random    {} {:.4}", r.metric, r.value);
    }
    if let Some(r) = &b.majority {
        println!("baseline majority  {} {:.4}", r.metric, r.value);
    }
    if let Some(r) = &b.fbank {
        print!("baseline fbank     ");
        print_layer(r);
    }
}

fn status(converged: bool) -> ExitCode {
    if converged {
        ExitCode::SUCCESS
    } else {
        log::warn!("some fits stopped at max_epochs; see converged column");
        ExitCode::from(2)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Align { run, layer, out } => {
            let prepared = PreparedRun::new(&run.run_config()?)?;
            let ds = prepared.dataset(layer)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            ds.dump(&out)?;
            println!("{} frames x {} dims -> {}", ds.len(), ds.dim(), out.display());
            for (name, n) in prepared.task.classes.iter().zip(ds.class_counts()) {
                println!("  {name}: {n}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::F0 { run, out } => {
            let (manifest, f0, _) = run.extraction()?;
            let tracks = extract_f0(&read_manifest(&manifest)?, &f0, &out)?;
            let voiced: usize = tracks.iter().map(|t| t.voiced_count()).sum();
            let total: usize = tracks.iter().map(|t| t.len()).sum();
            println!("{} utterances, {voiced}/{total} frames voiced -> {}", tracks.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Fbank { run, out } => {
            let (manifest, _, mel) = run.extraction()?;
            let m = extract_fbank(&read_manifest(&manifest)?, &mel, &out)?;
            println!(
                "{} utterances, {} mel bands -> {}",
                m.utterances.len(),
                m.dim,
                out.join("manifest.json").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Fit { run, layer } => {
            let prepared = PreparedRun::new(&run.run_config()?)?;
            let r = prepared.fit_layer(layer)?;
            let dir = prepared.run_dir();
            std::fs::create_dir_all(&dir)?;
            let path = dir.join(format!("layer_{layer:02}.json"));
            r.probe.save(&path)?;
            print_layer(&r);
            println!("model -> {}", path.display());
            Ok(status(r.converged()))
        }
        Command::Sweep { run } => {
            let cfg = run.run_config()?;
            let prepared = PreparedRun::new(&cfg)?;
            let res = prepared.sweep()?;
            let dir = prepared.run_dir();
            write_sweep(&dir, &res)?;
            print_sweep(&res);
            let mut converged = res.all_converged();
            if cfg.baselines.random || cfg.baselines.fbank {
                let b = prepared.baselines()?;
                write_baselines(&dir, &res.model_name, &res.task, &b)?;
                print_baselines(&b);
                converged &= b.all_converged();
            }
            println!("results -> {}", dir.display());
            Ok(status(converged))
        }
        Command::Baseline { run } => {
            let prepared = PreparedRun::new(&run.run_config()?)?;
            let b = prepared.baselines()?;
            let dir = prepared.run_dir();
            write_baselines(&dir, &prepared.manifest.model_name, &prepared.task, &b)?;
            print_baselines(&b);
            Ok(status(b.all_converged()))
        }
        Command::Report { results, config } => {
            let dir = match (results, config) {
                (Some(d), _) => d,
                (None, Some(c)) => RunConfig::load(&c)?.output_dir,
                (None, None) => bail!("pass --results or --config"),
            };
            for p in report(&dir)? {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

//! Command-line front end: `generate`, `train` and `evaluate`.
//!
//! Signals are exchanged as CSV (`t,emg_bi,emg_tri,q`), everything else as
//! JSON. Exit codes: 0 on success, 1 when every seed diverged or a run
//! failed, 2 for usage, spec and file errors.

use crate::datagen::{build_trial_set, DataConfig, Trial, TrialSet};
use crate::dynamics::ForwardModel;
use crate::error::{Error, Result};
use crate::network::{GruWeights, TensorRecord};
use crate::physics::{Gamma, IdentMode, Metrics};
use crate::series::TimeSeries;
use crate::trainer::{evaluate, predict_trial, train_seeds, Evaluation, ScaleSummary, TrainConfig};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Parser)]
#[command(name = "mrpirnn", version, about = "Multi-resolution physics-informed GRU for sEMG-driven elbow motion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic trial CSVs and the ground-truth record.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        seeds: Option<Vec<u64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        scales: Option<Vec<i32>>,
    },
    /// Train every seed on the trial CSVs and write results and checkpoints.
    Train {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory holding `trial_<k>.csv`; defaults to `--out`.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        seeds: Option<Vec<u64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        scales: Option<Vec<i32>>,
    },
    /// Roll a checkpoint out on one trial CSV.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        trial: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        spec: Option<PathBuf>,
    },
}

/// Everything needed to reproduce an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub data: DataConfig,
    pub model: ForwardModel,
    pub train: TrainConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self { data: DataConfig::default(), model: ForwardModel::default(), train: TrainConfig::default() }
    }
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        if text.trim().is_empty() {
            return Err(Error::InvalidConfig(format!("{} is empty", path.display())));
        }
        let spec: Self = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.geometry.validate()?;
        self.model.biceps.validate()?;
        self.model.triceps.validate()?;
        self.model.activation.validate()?;
        self.train.validate()
    }

    fn with_overrides(mut self, seeds: Option<Vec<u64>>, scales: Option<Vec<i32>>) -> Result<Self> {
        if let Some(s) = seeds {
            self.train.seeds = s;
        }
        if let Some(s) = scales {
            self.train.scales = s;
        }
        self.validate()?;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub gamma: Gamma,
    pub model: ForwardModel,
    pub noise_sigma: f64,
    pub seed: u64,
    pub dt: f64,
    pub samples: usize,
    pub train_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub history_steps: usize,
    pub hidden_bias: bool,
    pub ident_mode: IdentMode,
    pub gamma: Gamma,
    pub ident: Vec<TensorRecord>,
    pub weights: BTreeMap<String, TensorRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleResult {
    pub scale: i32,
    pub summary: ScaleSummary,
    pub gamma: Gamma,
    pub test: Option<Evaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub error: Option<String>,
    pub scales: Vec<ScaleResult>,
    pub gamma: Option<Gamma>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRecord {
    pub spec: ExperimentSpec,
    pub seeds: Vec<SeedResult>,
    /// Mean and standard deviation across converged seeds.
    pub gamma: BTreeMap<String, Spread>,
    pub gamma_percent_error: Option<BTreeMap<String, Spread>>,
    pub test_mean: Option<Metrics>,
    pub wall_clock_seconds: f64,
}

fn spread(values: &[f64]) -> Spread {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Spread { mean, std }
}

pub fn write_trial_csv(path: &Path, trial: &Trial) -> Result<()> {
    write_signal_csv(path, trial, None)
}

fn write_signal_csv(path: &Path, trial: &Trial, q_pred: Option<&[f64]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t", "emg_bi", "emg_tri", "q"];
    if q_pred.is_some() {
        header.push("q_pred");
    }
    w.write_record(&header)?;
    for i in 0..trial.q.len() {
        let mut rec = vec![
            trial.q.time(i).to_string(),
            trial.emg_bi.values[i].to_string(),
            trial.emg_tri.values[i].to_string(),
            trial.q.values[i].to_string(),
        ];
        if let Some(p) = q_pred {
            rec.push(p[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trial_csv(path: &Path, index: usize) -> Result<Trial> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidConfig(format!("{} has no column {name}", path.display())))
    };
    let (ct, cb, cr, cq) = (col("t")?, col("emg_bi")?, col("emg_tri")?, col("q")?);
    let (mut t, mut b, mut tr, mut q) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let num = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::InvalidConfig(format!("bad number in {}", path.display())))
        };
        t.push(num(ct)?);
        b.push(num(cb)?);
        tr.push(num(cr)?);
        q.push(num(cq)?);
    }
    if t.len() < 2 {
        return Err(Error::Empty("trial rows"));
    }
    let dt = t[1] - t[0];
    Ok(Trial {
        index,
        emg_bi: TimeSeries::new(dt, b),
        emg_tri: TimeSeries::new(dt, tr),
        q: TimeSeries::new(dt, q),
    })
}

pub fn trial_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("trial_{index}.csv"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn cmd_generate(spec: &ExperimentSpec, out: &Path) -> Result<TrialSet> {
    let set = build_trial_set(&spec.data, &spec.model)?;
    fs::create_dir_all(out)?;
    for trial in &set.trials {
        write_trial_csv(&trial_path(out, trial.index), trial)?;
    }
    let truth = TruthRecord {
        gamma: set.truth(),
        model: set.model,
        noise_sigma: set.noise_sigma,
        seed: set.seed,
        dt: set.dt,
        samples: spec.data.samples,
        train_ids: spec.train.train_trial_ids.clone(),
        test_ids: spec.train.test_trial_ids.clone(),
    };
    write_json(&out.join("truth.json"), &truth)?;
    Ok(set)
}

fn load_trials(dir: &Path, ids: &[usize]) -> Result<Vec<Trial>> {
    ids.iter()
        .map(|&i| {
            let path = trial_path(dir, i);
            if !path.exists() {
                return Err(Error::InvalidConfig(format!("missing trial file {}", path.display())));
            }
            read_trial_csv(&path, i)
        })
        .collect()
}

pub fn cmd_train(spec: &ExperimentSpec, data_dir: &Path, out: &Path) -> Result<ResultsRecord> {
    let start = Instant::now();
    let cfg = &spec.train;
    let train = load_trials(data_dir, &cfg.train_trial_ids)?;
    let test = load_trials(data_dir, &cfg.test_trial_ids)?;
    fs::create_dir_all(out)?;
    let runs = train_seeds(&train, &test, cfg);
    let truth: Option<Gamma> = fs::read_to_string(data_dir.join("truth.json"))
        .ok()
        .and_then(|s| serde_json::from_str::<TruthRecord>(&s).ok())
        .map(|t| t.gamma);

    let mut seeds = Vec::new();
    let mut gammas = Vec::new();
    let mut finals = Vec::new();
    for (seed, run) in runs {
        match run {
            Ok(run) => {
                let gamma = run.gamma(cfg);
                let ckpt = Checkpoint {
                    history_steps: cfg.history_steps,
                    hidden_bias: cfg.hidden_bias,
                    ident_mode: cfg.ident.mode,
                    gamma,
                    ident: run.state.ident.iter().map(TensorRecord::from_matrix).collect(),
                    weights: run.state.weights.to_checkpoint(),
                };
                write_json(&out.join(format!("checkpoint_seed{seed}.json")), &ckpt)?;
                if let Some(e) = run.final_test() {
                    finals.push(e.mean);
                }
                gammas.push(gamma);
                seeds.push(SeedResult {
                    seed,
                    error: None,
                    scales: run
                        .scales
                        .into_iter()
                        .map(|s| ScaleResult { scale: s.summary.scale, summary: s.summary, gamma: s.gamma, test: s.test })
                        .collect(),
                    gamma: Some(gamma),
                    seconds: run.seconds,
                });
            }
            Err(e) => seeds.push(SeedResult { seed, error: Some(e.to_string()), scales: vec![], gamma: None, seconds: 0.0 }),
        }
    }
    let labels = crate::physics::PARAM_LABELS;
    let mut gamma = BTreeMap::new();
    let mut pct = BTreeMap::new();
    if !gammas.is_empty() {
        for (i, label) in labels.iter().enumerate() {
            let vals: Vec<f64> = gammas.iter().map(|g| g.to_array()[i]).collect();
            gamma.insert(label.to_string(), spread(&vals));
            if let Some(t) = truth {
                let errs: Vec<f64> = gammas.iter().map(|g| 100.0 * g.relative_errors(&t)[i].abs()).collect();
                pct.insert(label.to_string(), spread(&errs));
            }
        }
    }
    let test_mean = (!finals.is_empty()).then(|| {
        let k = finals.len() as f64;
        Metrics {
            mse: finals.iter().map(|m| m.mse).sum::<f64>() / k,
            r2: finals.iter().map(|m| m.r2).sum::<f64>() / k,
            nmse: finals.iter().map(|m| m.nmse).sum::<f64>() / k,
        }
    });
    let record = ResultsRecord {
        spec: spec.clone(),
        seeds,
        gamma,
        gamma_percent_error: truth.map(|_| pct),
        test_mean,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&out.join("results.json"), &record)?;
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub trial: String,
    pub evaluation: Evaluation,
}

pub fn cmd_evaluate(checkpoint: &Path, trial_csv: &Path, out: &Path) -> Result<EvaluationRecord> {
    let ckpt: Checkpoint = serde_json::from_str(&fs::read_to_string(checkpoint)?)?;
    let weights = GruWeights::from_checkpoint(&ckpt.weights, ckpt.hidden_bias)?;
    let trial = read_trial_csv(trial_csv, 0)?;
    if weights.input_size() != 3 {
        return Err(Error::ShapeMismatch(format!("checkpoint expects {} inputs, trials provide 3", weights.input_size())));
    }
    let pred = predict_trial(&weights, &trial, ckpt.history_steps)?;
    let evaluation = evaluate(&weights, ckpt.gamma, std::slice::from_ref(&trial), ckpt.history_steps)?;
    fs::create_dir_all(out)?;
    let stem = trial_csv.file_stem().and_then(|s| s.to_str()).unwrap_or("trial").to_string();
    write_signal_csv(&out.join(format!("{stem}_prediction.csv")), &trial, Some(&pred.values))?;
    let record = EvaluationRecord { trial: trial_csv.display().to_string(), evaluation };
    write_json(&out.join(format!("{stem}_metrics.json")), &record)?;
    Ok(record)
}

fn usage_error(e: &Error) -> bool {
    matches!(e, Error::InvalidConfig(_) | Error::Json(_) | Error::Io(_) | Error::Csv(_) | Error::InvalidParameter(_))
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome: Result<i32> = match cli.command {
        Command::Generate { spec, out, seeds, scales } => ExperimentSpec::load(&spec)
            .and_then(|s| s.with_overrides(seeds, scales))
            .and_then(|s| cmd_generate(&s, &out))
            .map(|set| {
                println!("wrote {} trials to {}", set.trials.len(), out.display());
                0
            }),
        Command::Train { spec, out, data, seeds, scales } => {
            let data_dir = data.unwrap_or_else(|| out.clone());
            ExperimentSpec::load(&spec)
                .and_then(|s| s.with_overrides(seeds, scales))
                .and_then(|s| cmd_train(&s, &data_dir, &out))
                .map(|rec| {
                    for s in &rec.seeds {
                        match &s.error {
                            Some(e) => eprintln!("seed {}: {e}", s.seed),
                            None => println!("seed {}: {:?}", s.seed, s.gamma.map(|g| g.to_array())),
                        }
                    }
                    if rec.seeds.iter().all(|s| s.error.is_some()) {
                        1
                    } else {
                        0
                    }
                })
        }
        Command::Evaluate { checkpoint, trial, out, spec } => {
            let spec_ok = spec.map(|p| ExperimentSpec::load(&p).map(|_| ())).unwrap_or(Ok(()));
            let missing = [&checkpoint, &trial].into_iter().find(|p| !p.exists()).cloned();
            match (spec_ok, missing) {
                (Err(e), _) => Err(e),
                (_, Some(p)) => Err(Error::InvalidConfig(format!("missing file {}", p.display()))),
                _ => cmd_evaluate(&checkpoint, &trial, &out).map(|rec| {
                    let m = rec.evaluation.mean;
                    println!("mse {:.6e} r2 {:.6} nmse {:.6e}", m.mse, m.r2, m.nmse);
                    0
                }),
            }
        }
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if usage_error(&e) {
                2
            } else {
                1
            }
        }
    }
}

//! Command-line front end for the `dib` binary.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::datagen::{
    random_model, read_dataset, sample_classification, sample_gaussian, toy_discrete_joint, write_csv, write_dataset,
    MultiviewDataset, ToyJointSpec,
};
use crate::discrete_ba::{ba_solve, BaConfig};
use crate::dvib::{
    estimate_pair, load_checkpoint, predict, save_checkpoint, target_entropy, train, DvibModel, PredictMode,
    TrainConfig, TrainTrace,
};
use crate::error::{DibError, Result};
use crate::gauss_dib::{boundary_at_rate, boundary_at_s, cib_bound};
use crate::info::{nats_to_bits, FieldFactor, JointPmf, LinearGaussianModel};
use crate::sweep::{
    load_sweep_config, run_sweep, write_manifest, write_points_csv, Algorithm, ProblemSpec, SGrid, SweepConfig,
};

/// Model seed used by the presets unless overridden.
pub const PRESET_MODEL_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(name = "dib", version, about = "Distributed information bottleneck solvers and tooling")]
pub struct Cli {
    /// Print information quantities in bits (files always hold nats).
    #[arg(long, global = true)]
    pub bits: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random linear-Gaussian model and samples from it.
    GenData(GenDataArgs),
    /// Emit the distributed and centralized Gaussian relevance-complexity curves.
    RegionGauss(RegionArgs),
    /// Run a solver over an s-grid and write a points CSV and a manifest.
    Sweep(SweepArgs),
    /// Train one variational model.
    DvibTrain(DvibTrainArgs),
    /// Evaluate a trained checkpoint on a dataset.
    DvibEval(DvibEvalArgs),
    /// Solve one discrete problem with the alternating algorithm.
    BaDiscrete(BaDiscreteArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// n_y = 1, two 3-dimensional views, 40000 samples split 30000/10000.
    Fig3,
    /// n_y = 2, two 3-dimensional views, 60000 samples split 50000/10000.
    Fig5,
}

impl Preset {
    fn shape(self) -> (usize, Vec<usize>, usize, usize) {
        match self {
            Preset::Fig3 => (1, vec![3, 3], 40_000, 30_000),
            Preset::Fig5 => (2, vec![3, 3], 60_000, 50_000),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldArg {
    Real,
    Complex,
}

impl From<FieldArg> for FieldFactor {
    fn from(f: FieldArg) -> Self {
        match f {
            FieldArg::Real => FieldFactor::Real,
            FieldArg::Complex => FieldFactor::Complex,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct GenDataArgs {
    /// JSON file with any of these options (flags win).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub n_y: Option<usize>,
    /// View dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long)]
    pub model_seed: Option<u64>,
    /// Read the model from JSON instead of drawing one.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Class-conditional Gaussian classification data with this many classes.
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Size of the training part; the rest becomes the test part.
    #[arg(long)]
    pub split: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output stem; writes `<stem>.model.json` and dataset files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write CSV exports.
    #[arg(long)]
    pub csv: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct RegionArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Model JSON (as written by gen-data).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub model_seed: Option<u64>,
    /// Scalar model with unit target and noise variances and these gains.
    #[arg(long, value_delimiter = ',')]
    pub scalar: Option<Vec<f64>>,
    /// Sum-complexity values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
    /// Evenly spaced rates on [0, r_max] (with --count).
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Log-spaced s values on [s_min, s_max] (with --count).
    #[arg(long)]
    pub s_min: Option<f64>,
    #[arg(long)]
    pub s_max: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, value_enum)]
    pub field: Option<FieldArg>,
    /// Output directory for boundary.csv and cib.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    /// Sweep config JSON, or a manifest from an earlier sweep.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub algorithm: Option<Algorithm>,
    #[arg(long)]
    pub s_min: Option<f64>,
    #[arg(long)]
    pub s_max: Option<f64>,
    #[arg(long)]
    pub s_count: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long, value_enum)]
    pub field: Option<FieldArg>,
    /// Use the preset model (ba-gauss) or its samples (dvib).
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Discrete joint JSON (ba-discrete).
    #[arg(long)]
    pub joint: Option<PathBuf>,
    /// Dataset sidecars (dvib).
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Points CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Manifest path (default: `<out>.manifest.json`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DvibTrainArgs {
    /// TrainConfig JSON (flags win).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub minibatch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub latent_dims: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub encoder_hidden: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub decoder_hidden: Option<Vec<usize>>,
    /// Drop the side-decoder terms from the cost.
    #[arg(long)]
    pub no_reg: bool,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Per-epoch trajectory CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DvibEvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ToyKind {
    Copy,
    Independent,
    Random,
}

#[derive(Debug, Clone, Default, Args)]
pub struct BaDiscreteArgs {
    /// BaConfig JSON (flags win).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Joint pmf JSON.
    #[arg(long)]
    pub joint: Option<PathBuf>,
    /// Built-in fixture instead of a joint file.
    #[arg(long, value_enum)]
    pub toy: Option<ToyKind>,
    #[arg(long, default_value_t = 2)]
    pub views: usize,
    #[arg(long, default_value_t = 2)]
    pub alphabet: usize,
    #[arg(long, default_value_t = 0)]
    pub toy_seed: u64,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Write the full solution (encoders, decoders, trace) as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// What a subcommand did: lines for stdout and whether every row succeeded.
#[derive(Debug, Default)]
pub struct Report {
    pub lines: Vec<String>,
    pub failures: usize,
}

struct Units {
    bits: bool,
}

impl Units {
    fn fmt(&self, nats: f64) -> String {
        if self.bits {
            format!("{:.6} bits", nats_to_bits(nats))
        } else {
            format!("{nats:.6} nats")
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| DibError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| DibError::format(path, e.to_string()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| DibError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| DibError::io(path, e))
}

/// Overlays the flags that were given on top of a JSON config of the same
/// shape.
fn merge_with_config<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> Result<T> {
    let Some(path) = config else {
        return Ok(serde_json::from_value(serde_json::to_value(flags)?)?);
    };
    let mut base: serde_json::Value = read_json(path)?;
    let over = serde_json::to_value(flags)?;
    if let (Some(b), Some(o)) = (base.as_object_mut(), over.as_object()) {
        for (k, v) in o {
            if !v.is_null() {
                b.insert(k.clone(), v.clone());
            }
        }
    } else {
        return Err(DibError::format(path, "config must be a JSON object"));
    }
    serde_json::from_value(base).map_err(|e| DibError::format(path, e.to_string()))
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn gen_data(args: &GenDataArgs) -> Result<Report> {
    let a = merge_with_config(args, args.config.as_deref())?;
    let out = a.out.clone().ok_or_else(|| DibError::Usage("--out is required".into()))?;
    let (p_ny, p_dims, p_n, p_split) = a.preset.map(Preset::shape).unwrap_or((1, vec![3, 3], 0, 0));
    let n = a.n.unwrap_or(p_n);
    if n == 0 {
        return Err(DibError::Usage("sample count must be at least 1 (use --n or --preset)".into()));
    }
    let split = a.split.or((p_split > 0).then_some(p_split));
    let seed = a.seed.unwrap_or(0);
    let mut report = Report::default();
    let ds = if let Some(classes) = a.classes {
        let dims = a.dims.clone().unwrap_or(p_dims);
        sample_classification(classes, &dims, a.separation.unwrap_or(1.0), n, seed)?
    } else {
        let model = match &a.model {
            Some(path) => read_json::<LinearGaussianModel>(path)?,
            None => random_model(
                a.n_y.unwrap_or(p_ny),
                &a.dims.clone().unwrap_or(p_dims),
                a.model_seed.unwrap_or(PRESET_MODEL_SEED),
            )?,
        };
        let model_path = with_suffix(&out, ".model.json");
        write_text(&model_path, &serde_json::to_string_pretty(&model)?)?;
        report.lines.push(format!("model: {}", model_path.display()));
        sample_gaussian(&model, n, seed)?
    };
    let parts: Vec<(PathBuf, MultiviewDataset)> = match split {
        Some(k) if k < n => {
            let (tr, te) = ds.split(k)?;
            vec![(with_suffix(&out, "-train"), tr), (with_suffix(&out, "-test"), te)]
        }
        Some(k) if k > n => return Err(DibError::Usage(format!("split {k} exceeds n = {n}"))),
        _ => vec![(out.clone(), ds)],
    };
    for (stem, part) in parts {
        if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| DibError::io(dir, e))?;
        }
        let sidecar = write_dataset(&part, &stem)?;
        report.lines.push(format!("dataset: {} ({} samples)", sidecar.display(), part.n()));
        if a.csv.unwrap_or(false) {
            let csv = with_suffix(&stem, ".csv");
            write_csv(&part, &csv)?;
            report.lines.push(format!("csv: {}", csv.display()));
        }
    }
    Ok(report)
}

pub const BOUNDARY_HEADER: &str = "r_sum,delta,s,gap,converged";
pub const CIB_HEADER: &str = "r_sum,delta";

fn gaussian_model(model: Option<&Path>, preset: Option<Preset>, model_seed: Option<u64>, scalar: Option<&[f64]>) -> Result<LinearGaussianModel> {
    match (model, scalar) {
        (Some(p), _) => read_json(p),
        (None, Some(g)) => LinearGaussianModel::scalar(g),
        (None, None) => {
            let (n_y, dims, _, _) = preset.unwrap_or(Preset::Fig3).shape();
            random_model(n_y, &dims, model_seed.unwrap_or(PRESET_MODEL_SEED))
        }
    }
}

pub fn region_gauss(args: &RegionArgs, bits: bool) -> Result<Report> {
    let a = merge_with_config(args, args.config.as_deref())?;
    let units = Units { bits };
    let out = a.out.clone().ok_or_else(|| DibError::Usage("--out is required".into()))?;
    let model = gaussian_model(a.model.as_deref(), a.preset, a.model_seed, a.scalar.as_deref())?;
    let field: FieldFactor = a.field.unwrap_or(FieldArg::Real).into();
    let count = a.count.unwrap_or(20);
    let points = if let (Some(lo), Some(hi)) = (a.s_min, a.s_max) {
        let grid = SGrid { min: lo, max: hi, count }.values()?;
        grid.iter().map(|&s| boundary_at_s(&model, s, field)).collect::<Result<Vec<_>>>()?
    } else {
        let rates = match (&a.rates, a.r_max) {
            (Some(r), _) => r.clone(),
            (None, Some(max)) if count >= 2 => (0..count).map(|i| max * i as f64 / (count - 1) as f64).collect(),
            (None, Some(max)) => vec![max],
            (None, None) => return Err(DibError::Usage("give --rates, --r-max or --s-min/--s-max".into())),
        };
        rates.iter().map(|&r| boundary_at_rate(&model, r, field)).collect::<Result<Vec<_>>>()?
    };
    let mut boundary = format!("{BOUNDARY_HEADER}\n");
    let mut cib = format!("{CIB_HEADER}\n");
    let mut report = Report::default();
    for p in &points {
        let r = p.point.sum_complexity;
        let c = cib_bound(&model, r, field)?;
        boundary.push_str(&format!("{},{},{},{},{}\n", r, p.point.relevance, p.point.s, p.gap, p.point.converged));
        cib.push_str(&format!("{r},{c}\n"));
        let flag = if p.point.converged { "" } else { "  [not converged]" };
        report.lines.push(format!(
            "R = {}  distributed {}  centralized {}{flag}",
            units.fmt(r),
            units.fmt(p.point.relevance),
            units.fmt(c)
        ));
    }
    fs::create_dir_all(&out).map_err(|e| DibError::io(&out, e))?;
    write_text(&out.join("boundary.csv"), &boundary)?;
    write_text(&out.join("cib.csv"), &cib)?;
    report.lines.push(format!("wrote {} and {}", out.join("boundary.csv").display(), out.join("cib.csv").display()));
    Ok(report)
}

pub fn sweep_config_from_args(a: &SweepArgs) -> Result<SweepConfig> {
    let mut cfg = match &a.config {
        Some(p) => load_sweep_config(p)?,
        None => SweepConfig::default(),
    };
    if let Some(alg) = a.algorithm {
        cfg.algorithm = alg;
    }
    if a.s_min.is_some() || a.s_max.is_some() || a.s_count.is_some() {
        let g = cfg.grid();
        cfg.grid = Some(SGrid {
            min: a.s_min.unwrap_or(g.min),
            max: a.s_max.unwrap_or(g.max),
            count: a.s_count.unwrap_or(g.count),
        });
    }
    if let Some(seeds) = &a.seeds {
        cfg.seeds = seeds.clone();
    }
    if let Some(p) = a.parallelism {
        cfg.parallelism = p;
    }
    if let Some(f) = a.field {
        cfg.field = f.into();
    }
    if let Some(e) = a.epochs {
        cfg.dvib.epochs = e;
    }
    if let Some(path) = &a.model {
        cfg.problem = Some(ProblemSpec::GaussianModelFile { path: path.clone() });
    }
    if let Some(path) = &a.joint {
        cfg.problem = Some(ProblemSpec::DiscreteJointFile { path: path.clone() });
    }
    if let Some(train) = &a.train {
        cfg.problem = Some(ProblemSpec::DatasetFiles {
            train: train.clone(),
            test: a.test.clone(),
        });
    }
    if let Some(preset) = a.preset {
        let (n_y, dims, n, split) = preset.shape();
        cfg.problem = Some(match cfg.algorithm {
            Algorithm::Dvib => ProblemSpec::GaussianSamples {
                n_y,
                dims,
                model_seed: PRESET_MODEL_SEED,
                n_train: split,
                n_test: n - split,
                data_seed: 0,
            },
            _ => ProblemSpec::GaussianPreset {
                n_y,
                dims,
                model_seed: PRESET_MODEL_SEED,
            },
        });
    }
    Ok(cfg)
}

pub fn sweep(args: &SweepArgs, bits: bool) -> Result<Report> {
    let cfg = sweep_config_from_args(args)?;
    let units = Units { bits };
    let (rows, manifest) = run_sweep(&cfg)?;
    write_points_csv(&rows, &args.out)?;
    let manifest_path = args.manifest.clone().unwrap_or_else(|| with_suffix(&args.out, ".manifest.json"));
    write_manifest(&manifest, &manifest_path)?;
    let mut report = Report {
        failures: manifest.failures(),
        ..Default::default()
    };
    for r in &rows {
        report.lines.push(match (&r.error, r.delta_train, r.r_sum) {
            (Some(e), _, _) => format!("s = {:e} seed {}: FAILED: {e}", r.s, r.seed),
            (None, Some(d), Some(rs)) => format!(
                "s = {:e} seed {}: relevance {}  sum-complexity {}  ({} iterations{})",
                r.s,
                r.seed,
                units.fmt(d),
                units.fmt(rs),
                r.iters,
                if r.converged { "" } else { ", not converged" }
            ),
            _ => unreachable!("successful rows carry values"),
        });
    }
    report.lines.push(format!("wrote {} and {}", args.out.display(), manifest_path.display()));
    Ok(report)
}

pub const TRACE_HEADER: &str = "epoch,cost,train_cost,delta_train,r_train,delta_test,r_test";

pub fn trace_csv(trace: &TrainTrace) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = format!("{TRACE_HEADER}\n");
    for r in &trace.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.epoch,
            r.cost,
            r.train_cost,
            opt(r.delta_train),
            opt(r.r_train),
            opt(r.delta_test),
            opt(r.r_test)
        ));
    }
    out
}

pub fn dvib_train(a: &DvibTrainArgs, bits: bool) -> Result<Report> {
    let units = Units { bits };
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = &a.$field { cfg.$field = v.clone(); } )* };
    }
    set!(s, epochs, minibatch, seed, latent_dims, encoder_hidden, decoder_hidden);
    if a.no_reg {
        cfg.no_reg = true;
    }
    let train_ds = read_dataset(&a.train)?;
    let test_ds = a.test.as_ref().map(read_dataset).transpose()?;
    let (model, trace) = train(&train_ds, test_ds.as_ref(), &cfg)?;
    save_checkpoint(&model, &cfg, &a.checkpoint)?;
    let mut report = Report::default();
    if let Some(path) = &a.trace {
        write_text(path, &trace_csv(&trace))?;
        report.lines.push(format!("trace: {} ({} epochs)", path.display(), trace.records.len()));
    }
    if let Some(last) = trace.last_evaluated() {
        report.lines.push(format!(
            "train: relevance {}  sum-complexity {}",
            units.fmt(last.delta_train.unwrap_or(f64::NAN)),
            units.fmt(last.r_train.unwrap_or(f64::NAN))
        ));
        if let (Some(d), Some(r)) = (last.delta_test, last.r_test) {
            report.lines.push(format!("test:  relevance {}  sum-complexity {}", units.fmt(d), units.fmt(r)));
        }
    }
    report.lines.push(format!("checkpoint: {}", a.checkpoint.display()));
    Ok(report)
}

/// Metrics of a model on a dataset, one-shot and averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub relevance: f64,
    pub sum_complexity: f64,
    pub one_shot: Option<f64>,
    pub averaged: Option<f64>,
    /// "accuracy" or "mse".
    pub metric: String,
}

pub fn evaluate_model(model: &DvibModel, ds: &MultiviewDataset, draws: usize, seed: u64) -> Result<EvalSummary> {
    let h = target_entropy(ds)?;
    let est = estimate_pair(model, ds, h, draws, seed)?;
    let one = predict(model, ds, PredictMode::OneShot, seed)?;
    let avg = predict(model, ds, PredictMode::Averaged { draws }, seed)?;
    let (metric, one_shot, averaged) = match one.accuracy(ds) {
        Some(acc) => ("accuracy", Some(acc), avg.accuracy(ds)),
        None => ("mse", one.mean_squared_error(ds), avg.mean_squared_error(ds)),
    };
    Ok(EvalSummary {
        relevance: est.relevance,
        sum_complexity: est.sum_complexity,
        one_shot,
        averaged,
        metric: metric.into(),
    })
}

pub fn dvib_eval(a: &DvibEvalArgs, bits: bool) -> Result<Report> {
    let units = Units { bits };
    let (model, _) = load_checkpoint(&a.checkpoint)?;
    let ds = read_dataset(&a.data)?;
    let e = evaluate_model(&model, &ds, a.draws, a.seed)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "n/a".into());
    Ok(Report {
        lines: vec![
            format!("relevance {}  sum-complexity {}", units.fmt(e.relevance), units.fmt(e.sum_complexity)),
            format!("{} one-shot {}  averaged({}) {}", e.metric, opt(e.one_shot), a.draws, opt(e.averaged)),
        ],
        failures: 0,
    })
}

pub fn ba_discrete(a: &BaDiscreteArgs, bits: bool) -> Result<Report> {
    let units = Units { bits };
    let joint: JointPmf = match (&a.joint, a.toy) {
        (Some(p), _) => read_json(p)?,
        (None, Some(kind)) => {
            let spec = match kind {
                ToyKind::Copy => ToyJointSpec::Copy {
                    views: a.views,
                    alphabet: a.alphabet,
                },
                ToyKind::Independent => ToyJointSpec::Independent {
                    y: a.alphabet,
                    views: vec![a.alphabet; a.views],
                },
                ToyKind::Random => ToyJointSpec::Random {
                    y: a.alphabet,
                    views: vec![a.alphabet; a.views],
                },
            };
            toy_discrete_joint(&spec, a.toy_seed)?
        }
        (None, None) => return Err(DibError::Usage("give --joint or --toy".into())),
    };
    let mut cfg: BaConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => BaConfig::default(),
    };
    if let Some(s) = a.s {
        cfg.s = s;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(r) = a.restarts {
        cfg.restarts = r;
    }
    let sol = ba_solve(&joint, &cfg)?;
    let mut report = Report::default();
    report.lines.push(format!(
        "relevance {}  sum-complexity {}  cost {:.9}  ({} iterations{})",
        units.fmt(sol.pair.relevance),
        units.fmt(sol.pair.sum_complexity),
        sol.cost,
        sol.trace.iterations,
        if sol.trace.converged { "" } else { ", not converged" }
    ));
    if let Some(path) = &a.out {
        #[derive(Serialize)]
        struct Out<'a> {
            config: &'a BaConfig,
            relevance: f64,
            sum_complexity: f64,
            cost: f64,
            encoders: &'a crate::discrete_ba::EncoderSet,
            decoders: &'a crate::discrete_ba::DecoderSet,
            trace: &'a crate::discrete_ba::SolveTrace,
        }
        let out = Out {
            config: &cfg,
            relevance: sol.pair.relevance,
            sum_complexity: sol.pair.sum_complexity,
            cost: sol.cost,
            encoders: &sol.encoders,
            decoders: &sol.decoders,
            trace: &sol.trace,
        };
        write_text(path, &serde_json::to_string_pretty(&out)?)?;
        report.lines.push(format!("wrote {}", path.display()));
    }
    Ok(report)
}

pub fn execute(cli: &Cli) -> Result<Report> {
    match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::RegionGauss(a) => region_gauss(a, cli.bits),
        Command::Sweep(a) => sweep(a, cli.bits),
        Command::DvibTrain(a) => dvib_train(a, cli.bits),
        Command::DvibEval(a) => dvib_eval(a, cli.bits),
        Command::BaDiscrete(a) => ba_discrete(a, cli.bits),
    }
}

/// Entry point for the binary: 0 on success, 1 when some sweep rows
/// failed, 2 on errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(report) => {
            for l in &report.lines {
                println!("{l}");
            }
            if report.failures > 0 {
                eprintln!("{} run(s) failed", report.failures);
                1
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}


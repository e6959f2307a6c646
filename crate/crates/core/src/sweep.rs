//! s-grid sweeps over the three solvers, run in parallel and written as a
//! points CSV plus a run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{random_model, read_dataset, sample_gaussian, toy_discrete_joint, MultiviewDataset, ToyJointSpec};
use crate::discrete_ba::{ba_solve, BaConfig};
use crate::dvib::{predict, train, PredictMode, TrainConfig};
use crate::error::{DibError, Result};
use crate::gauss_dib::{ba_gauss_solve, GaussBaConfig};
use crate::info::{FieldFactor, JointPmf, LinearGaussianModel};
use crate::rng::PRNG_NAME;

pub const POINTS_HEADER: &str = "s,delta_train,delta_test,r_sum,metric,iters,converged,seed";
pub const MANIFEST_FORMAT: &str = "dib-sweep-manifest";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    BaDiscrete,
    #[default]
    BaGauss,
    Dvib,
}

impl std::str::FromStr for Algorithm {
    type Err = DibError;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| DibError::Usage(format!("unknown algorithm {s:?} (ba-discrete, ba-gauss, dvib)")))
    }
}

/// `count` log-spaced values from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl SGrid {
    pub fn default_for(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Dvib => SGrid {
                min: 1e-10,
                max: 1.0,
                count: 15,
            },
            _ => SGrid {
                min: 1e-3,
                max: 10.0,
                count: 20,
            },
        }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.min > 0.0 && self.max >= self.min && self.max.is_finite()) || self.count == 0 {
            return Err(DibError::Usage(format!(
                "s-grid needs 0 < min <= max and count >= 1, got {self:?}"
            )));
        }
        if self.count == 1 {
            return Ok(vec![self.min]);
        }
        let (a, b) = (self.min.ln(), self.max.ln());
        Ok((0..self.count)
            .map(|i| {
                if i == 0 {
                    self.min
                } else if i + 1 == self.count {
                    self.max
                } else {
                    (a + (b - a) * i as f64 / (self.count - 1) as f64).exp()
                }
            })
            .collect())
    }
}

/// Where the sweep's model or data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemSpec {
    /// Seeded random linear-Gaussian model.
    GaussianPreset { n_y: usize, dims: Vec<usize>, model_seed: u64 },
    GaussianModelFile { path: PathBuf },
    DiscreteToy { joint: ToyJointSpec, seed: u64 },
    DiscreteJointFile { path: PathBuf },
    /// Train/test samples drawn from a seeded random linear-Gaussian model.
    GaussianSamples {
        n_y: usize,
        dims: Vec<usize>,
        model_seed: u64,
        n_train: usize,
        n_test: usize,
        data_seed: u64,
    },
    /// Datasets written by `write_dataset` (the `.json` sidecar paths).
    DatasetFiles { train: PathBuf, test: Option<PathBuf> },
}

/// Preset model: scalar target, two 3-dimensional views.
pub fn fig3_problem(model_seed: u64) -> ProblemSpec {
    ProblemSpec::GaussianPreset {
        n_y: 1,
        dims: vec![3, 3],
        model_seed,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Gaussian(LinearGaussianModel),
    Discrete(JointPmf),
    Data {
        train: MultiviewDataset,
        test: Option<MultiviewDataset>,
    },
}

impl ProblemSpec {
    pub fn resolve(&self) -> Result<Problem> {
        let read_json = |path: &Path| -> Result<String> { fs::read_to_string(path).map_err(|e| DibError::io(path, e)) };
        Ok(match self {
            ProblemSpec::GaussianPreset { n_y, dims, model_seed } => Problem::Gaussian(random_model(*n_y, dims, *model_seed)?),
            ProblemSpec::GaussianModelFile { path } => Problem::Gaussian(
                serde_json::from_str(&read_json(path)?).map_err(|e| DibError::format(path, e.to_string()))?,
            ),
            ProblemSpec::DiscreteToy { joint, seed } => Problem::Discrete(toy_discrete_joint(joint, *seed)?),
            ProblemSpec::DiscreteJointFile { path } => Problem::Discrete(
                serde_json::from_str(&read_json(path)?).map_err(|e| DibError::format(path, e.to_string()))?,
            ),
            ProblemSpec::GaussianSamples {
                n_y,
                dims,
                model_seed,
                n_train,
                n_test,
                data_seed,
            } => {
                let model = random_model(*n_y, dims, *model_seed)?;
                let all = sample_gaussian(&model, n_train + n_test, *data_seed)?;
                if *n_test == 0 {
                    Problem::Data { train: all, test: None }
                } else {
                    let (train, test) = all.split(*n_train)?;
                    Problem::Data { train, test: Some(test) }
                }
            }
            ProblemSpec::DatasetFiles { train, test } => Problem::Data {
                train: read_dataset(train)?,
                test: test.as_ref().map(read_dataset).transpose()?,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub algorithm: Algorithm,
    /// Falls back to [`SGrid::default_for`] the algorithm.
    pub grid: Option<SGrid>,
    pub seeds: Vec<u64>,
    pub parallelism: usize,
    pub field: FieldFactor,
    pub problem: Option<ProblemSpec>,
    pub ba_discrete: BaConfig,
    pub ba_gauss: GaussBaConfig,
    pub dvib: TrainConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            algorithm: Algorithm::default(),
            grid: None,
            seeds: vec![0],
            parallelism: 1,
            field: FieldFactor::Real,
            problem: None,
            ba_discrete: BaConfig::default(),
            ba_gauss: GaussBaConfig::default(),
            dvib: TrainConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn grid(&self) -> SGrid {
        self.grid.unwrap_or_else(|| SGrid::default_for(self.algorithm))
    }

    /// Jobs sorted by `(s, seed)`.
    pub fn jobs(&self) -> Result<Vec<(f64, u64)>> {
        if self.seeds.is_empty() {
            return Err(DibError::Usage("a sweep needs at least one seed".into()));
        }
        let mut jobs: Vec<(f64, u64)> = self
            .grid()
            .values()?
            .into_iter()
            .flat_map(|s| self.seeds.iter().map(move |&seed| (s, seed)))
            .collect();
        jobs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        jobs.dedup();
        Ok(jobs)
    }
}

/// One solver run. `None` fields are written as empty CSV cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub s: f64,
    pub delta_train: Option<f64>,
    pub delta_test: Option<f64>,
    pub r_sum: Option<f64>,
    /// Test MSE (regression) or test accuracy (classification), D-VIB only.
    pub metric: Option<f64>,
    pub iters: usize,
    pub converged: bool,
    pub seed: u64,
    pub error: Option<String>,
    pub wall_seconds: f64,
}

impl SweepRow {
    fn failed(s: f64, seed: u64, err: &DibError, wall_seconds: f64) -> Self {
        SweepRow {
            s,
            delta_train: None,
            delta_test: None,
            r_sum: None,
            metric: None,
            iters: 0,
            converged: false,
            seed,
            error: Some(err.to_string()),
            wall_seconds,
        }
    }

    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.s,
            opt(self.delta_train),
            opt(self.delta_test),
            opt(self.r_sum),
            opt(self.metric),
            self.iters,
            self.converged,
            self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub s: f64,
    pub seed: u64,
    pub wall_seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub format: String,
    pub version: String,
    pub prng: String,
    pub config: SweepConfig,
    pub runs: Vec<RunRecord>,
    pub total_wall_seconds: f64,
}

impl SweepManifest {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.error.is_some()).count()
    }
}

/// Loads a sweep config, accepting either a bare config or a manifest (whose
/// `config` is reused).
pub fn load_sweep_config(path: impl AsRef<Path>) -> Result<SweepConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DibError::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| DibError::format(path, e.to_string()))?;
    let inner = match value.get("format") {
        Some(f) if f == MANIFEST_FORMAT => value.get("config").cloned().unwrap_or_default(),
        _ => value,
    };
    serde_json::from_value(inner).map_err(|e| DibError::format(path, e.to_string()))
}

fn run_job(config: &SweepConfig, problem: &Problem, s: f64, seed: u64) -> Result<SweepRow> {
    let row = |delta_train, delta_test, r_sum, metric, iters, converged| SweepRow {
        s,
        delta_train: Some(delta_train),
        delta_test,
        r_sum: Some(r_sum),
        metric,
        iters,
        converged,
        seed,
        error: None,
        wall_seconds: 0.0,
    };
    match (config.algorithm, problem) {
        (Algorithm::BaDiscrete, Problem::Discrete(joint)) => {
            let cfg = BaConfig {
                s,
                seed,
                ..config.ba_discrete.clone()
            };
            let sol = ba_solve(joint, &cfg)?;
            Ok(row(sol.pair.relevance, None, sol.pair.sum_complexity, None, sol.trace.iterations, sol.trace.converged))
        }
        (Algorithm::BaGauss, Problem::Gaussian(model)) => {
            let cfg = GaussBaConfig {
                s,
                seed,
                ..config.ba_gauss.clone()
            };
            let sol = ba_gauss_solve(model, &cfg, config.field)?;
            Ok(row(
                sol.point.relevance,
                None,
                sol.point.sum_complexity,
                None,
                sol.trace.iterations,
                sol.trace.converged,
            ))
        }
        (Algorithm::Dvib, Problem::Data { train: tr, test }) => {
            let cfg = TrainConfig {
                s,
                seed,
                ..config.dvib.clone()
            };
            let (model, trace) = train(tr, test.as_ref(), &cfg)?;
            let last = trace
                .last_evaluated()
                .ok_or_else(|| DibError::Training("no evaluated epoch".into()))?;
            let metric = match test {
                Some(t) => {
                    let pred = predict(&model, t, PredictMode::Averaged { draws: cfg.mc_eval }, seed)?;
                    pred.accuracy(t).or_else(|| pred.mean_squared_error(t))
                }
                None => None,
            };
            Ok(row(
                last.delta_train.expect("evaluated"),
                last.delta_test,
                last.r_train.expect("evaluated"),
                metric,
                trace.records.len(),
                true,
            ))
        }
        (alg, _) => Err(DibError::Usage(format!("problem kind does not fit algorithm {alg:?}"))),
    }
}

/// Runs every `(s, seed)` job on a pool of `config.parallelism` threads.
/// Rows come back sorted by `(s, seed)`; a failed job yields a row with its
/// error instead of aborting the sweep.
pub fn run_sweep(config: &SweepConfig) -> Result<(Vec<SweepRow>, SweepManifest)> {
    let started = Instant::now();
    let jobs = config.jobs()?;
    if config.parallelism == 0 {
        return Err(DibError::Usage("parallelism must be at least 1".into()));
    }
    let problem = config
        .problem
        .as_ref()
        .ok_or_else(|| DibError::Usage("sweep config has no problem".into()))?
        .resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| DibError::Usage(format!("thread pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(s, seed)| {
                let t = Instant::now();
                match run_job(config, &problem, s, seed) {
                    Ok(mut r) => {
                        r.wall_seconds = t.elapsed().as_secs_f64();
                        r
                    }
                    Err(e) => SweepRow::failed(s, seed, &e, t.elapsed().as_secs_f64()),
                }
            })
            .collect()
    });
    let manifest = SweepManifest {
        format: MANIFEST_FORMAT.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        prng: PRNG_NAME.into(),
        config: config.clone(),
        runs: rows
            .iter()
            .map(|r| RunRecord {
                s: r.s,
                seed: r.seed,
                wall_seconds: r.wall_seconds,
                error: r.error.clone(),
            })
            .collect(),
        total_wall_seconds: started.elapsed().as_secs_f64(),
    };
    Ok((rows, manifest))
}

pub fn points_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(POINTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

pub fn write_points_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, points_csv(rows)).map_err(|e| DibError::io(path, e))
}

pub fn write_manifest(manifest: &SweepManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, serde_json::to_string_pretty(manifest)?).map_err(|e| DibError::io(path, e))
}

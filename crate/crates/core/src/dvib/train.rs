//! Minibatch training, relevance/complexity estimates and prediction.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::heads::{clamp, softmax, ENCODER_LOG_VAR_RANGE};
use super::model::{
    empirical_cost, empirical_cost_grad, view_input_widths, Batch, DvibArch, DvibModel, NoiseBlock,
    TargetKind,
};
use crate::datagen::{MultiviewDataset, Targets};
use crate::error::{DibError, Result};
use crate::info::linalg::logdet_spd;
use crate::rng::{derive_stream, SeededRng};

const STREAM_INIT: u32 = 8;
const STREAM_SHUFFLE: u32 = 9;
const STREAM_TRAIN_NOISE: u32 = 10;
const STREAM_EVAL_NOISE: u32 = 11;
const STREAM_MONITOR_NOISE: u32 = 12;
const EVAL_CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub s: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub base_lr: f64,
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub mc_train: usize,
    pub mc_eval: usize,
    pub seed: u64,
    /// One entry per view, or a single entry shared by all views.
    pub latent_dims: Vec<usize>,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    /// Drop the side-decoder likelihoods from the cost.
    pub no_reg: bool,
    /// Log train/test estimates every this many epochs (and after the last).
    pub eval_every: usize,
    /// Evaluate on at most this many rows of each split.
    pub eval_rows: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            s: 0.01,
            epochs: 150,
            minibatch: 64,
            base_lr: 1e-3,
            lr_decay: 0.5,
            lr_decay_every: 30,
            mc_train: 1,
            mc_eval: 10,
            seed: 0,
            latent_dims: vec![16],
            encoder_hidden: vec![128, 128],
            decoder_hidden: vec![128],
            no_reg: false,
            eval_every: 1,
            eval_rows: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DibError::Usage(m.into()));
        if !(self.s >= 0.0 && self.s.is_finite()) {
            return bad("s must be finite and >= 0");
        }
        if self.epochs == 0 || self.minibatch == 0 || self.lr_decay_every == 0 || self.eval_every == 0 {
            return bad("epochs, minibatch, lr_decay_every and eval_every must be positive");
        }
        if self.mc_train == 0 || self.mc_eval == 0 {
            return bad("Monte-Carlo sample counts must be at least 1");
        }
        if !(self.base_lr > 0.0) || !(self.lr_decay > 0.0) {
            return bad("learning rate and decay must be positive");
        }
        if self.latent_dims.is_empty() || self.latent_dims.contains(&0) {
            return bad("latent dimensions must be positive");
        }
        if self.eval_rows == Some(0) {
            return bad("eval_rows must be positive");
        }
        Ok(())
    }

    /// `base_lr * lr_decay^floor(epoch / lr_decay_every)`, epochs counted from 0.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.base_lr * self.lr_decay.powi((epoch / self.lr_decay_every) as i32)
    }

    pub fn arch_for(&self, ds: &MultiviewDataset) -> Result<DvibArch> {
        let k = ds.num_views();
        let latent_dims = match self.latent_dims.len() {
            1 => vec![self.latent_dims[0]; k],
            n if n == k => self.latent_dims.clone(),
            n => {
                return Err(DibError::Dimension(format!("{n} latent dimensions for {k} views")));
            }
        };
        Ok(DvibArch {
            view_inputs: view_input_widths(ds),
            latent_dims,
            target: TargetKind::of(ds.targets()),
            encoder_hidden: self.encoder_hidden.clone(),
            decoder_hidden: self.decoder_hidden.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the minibatch costs seen during the epoch.
    pub cost: f64,
    /// Empirical cost of the end-of-epoch parameters on the training rows,
    /// under one noise block held fixed for the whole run.
    pub train_cost: f64,
    pub delta_train: Option<f64>,
    pub r_train: Option<f64>,
    pub delta_test: Option<f64>,
    pub r_test: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<EpochRecord>,
    pub target_entropy_train: f64,
    pub target_entropy_test: Option<f64>,
}

impl TrainTrace {
    /// End-of-epoch training costs averaged over a trailing window of
    /// `window` epochs (shorter at the start).
    pub fn smoothed_costs(&self, window: usize) -> Vec<f64> {
        let w = window.max(1);
        let costs: Vec<f64> = self.records.iter().map(|r| r.train_cost).collect();
        (0..costs.len())
            .map(|i| {
                let lo = (i + 1).saturating_sub(w);
                costs[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
            })
            .collect()
    }

    pub fn last_evaluated(&self) -> Option<&EpochRecord> {
        self.records.iter().rev().find(|r| r.delta_train.is_some())
    }
}

/// Monte-Carlo relevance and sum-complexity of a model on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    pub relevance: f64,
    pub sum_complexity: f64,
    pub target_entropy: f64,
    pub main_cross_entropy: f64,
    pub side_cross_entropy: Vec<f64>,
    pub kl: Vec<f64>,
}

/// Entropy of the target used to anchor relevance estimates: the generator's
/// value when recorded, else the empirical label entropy or the entropy of a
/// Gaussian fit.
pub fn target_entropy(ds: &MultiviewDataset) -> Result<f64> {
    if let Some(h) = ds.meta().target_entropy {
        return Ok(h);
    }
    match ds.targets() {
        Targets::Labels { classes, labels } => {
            let mut counts = vec![0usize; *classes];
            for &l in labels {
                counts[l as usize] += 1;
            }
            let n = labels.len() as f64;
            Ok(counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let p = c as f64 / n;
                    -p * p.ln()
                })
                .sum())
        }
        Targets::Real { dim, values } => {
            let n = values.len() / dim;
            let mean: Vec<f64> = (0..*dim).map(|c| (0..n).map(|i| values[i * dim + c]).sum::<f64>() / n as f64).collect();
            let cov = DMatrix::from_fn(*dim, *dim, |a, b| {
                (0..n).map(|i| (values[i * dim + a] - mean[a]) * (values[i * dim + b] - mean[b])).sum::<f64>() / n as f64
            });
            let ld = logdet_spd(&cov, "target covariance")?;
            Ok(0.5 * (*dim as f64 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() + ld))
        }
    }
}

/// `relevance = H(Y) - CE_main`,
/// `sum_complexity = relevance + sum_k [KL_k - (H(Y) - CE_k)]`, with
/// cross-entropies and KL terms averaged over the rows and `m` latent draws
/// per row from `SeededRng::with_stream(seed, ..)`.
pub fn estimate_pair(model: &DvibModel, ds: &MultiviewDataset, h_y: f64, m: usize, seed: u64) -> Result<PairEstimate> {
    estimate_pair_rows(model, ds, h_y, m, seed, ds.n())
}

fn estimate_pair_rows(model: &DvibModel, ds: &MultiviewDataset, h_y: f64, m: usize, seed: u64, rows: usize) -> Result<PairEstimate> {
    if m == 0 {
        return Err(DibError::Usage("need at least one Monte-Carlo draw".into()));
    }
    let k = model.arch().num_views();
    let rows = rows.min(ds.n());
    let mut rng = SeededRng::with_stream(seed, derive_stream(STREAM_EVAL_NOISE, 0));
    let (mut main, mut side, mut kl) = (0.0, vec![0.0; k], vec![0.0; k]);
    let mut start = 0;
    while start < rows {
        let end = (start + EVAL_CHUNK).min(rows);
        let idx: Vec<usize> = (start..end).collect();
        let batch = Batch::from_dataset(ds, &idx)?;
        let noise = NoiseBlock::draw(idx.len(), m, &model.arch().latent_dims, &mut rng);
        let t = empirical_cost(model, &batch, &noise, 0.0, false)?;
        let w = idx.len() as f64 / rows as f64;
        main += w * t.main_log_lik;
        for i in 0..k {
            side[i] += w * t.side_log_lik[i];
            kl[i] += w * t.kl[i];
        }
        start = end;
    }
    let relevance = h_y + main;
    let sum_complexity = relevance + (0..k).map(|i| kl[i] - (h_y + side[i])).sum::<f64>();
    Ok(PairEstimate {
        relevance,
        sum_complexity,
        target_entropy: h_y,
        main_cross_entropy: -main,
        side_cross_entropy: side.iter().map(|v| -v).collect(),
        kl,
    })
}

/// Trains on `train`, logging estimates on `train` and (optionally) `test`.
pub fn train(train: &MultiviewDataset, test: Option<&MultiviewDataset>, config: &TrainConfig) -> Result<(DvibModel, TrainTrace)> {
    config.validate()?;
    let arch = config.arch_for(train)?;
    if let Some(t) = test {
        if config.arch_for(t)? != arch {
            return Err(DibError::Dimension("train and test splits have different layouts".into()));
        }
    }
    let mut model = DvibModel::init(arch, &mut SeededRng::with_stream(config.seed, derive_stream(STREAM_INIT, 0)))?;
    let h_train = target_entropy(train)?;
    let h_test = test.map(target_entropy).transpose()?;
    let mut adam = Adam::new(model.params().len());
    let mut order: Vec<usize> = (0..train.n()).collect();
    let mut records = Vec::with_capacity(config.epochs);
    let eval_rows = config.eval_rows.unwrap_or(usize::MAX);
    let monitor_idx: Vec<usize> = (0..train.n().min(eval_rows)).collect();
    let monitor_batch = Batch::from_dataset(train, &monitor_idx)?;
    let monitor_noise = NoiseBlock::draw(
        monitor_idx.len(),
        config.mc_train,
        &model.arch().latent_dims,
        &mut SeededRng::with_stream(config.seed, derive_stream(STREAM_MONITOR_NOISE, 0)),
    );

    for epoch in 0..config.epochs {
        let lr = config.learning_rate(epoch);
        SeededRng::with_stream(config.seed, derive_stream(STREAM_SHUFFLE, epoch as u64)).shuffle(&mut order);
        let mut noise_rng = SeededRng::with_stream(config.seed, derive_stream(STREAM_TRAIN_NOISE, epoch as u64));
        let mut cost_sum = 0.0;
        for (b, chunk) in order.chunks(config.minibatch).enumerate() {
            let batch = Batch::from_dataset(train, chunk)?;
            let noise = NoiseBlock::draw(chunk.len(), config.mc_train, &model.arch().latent_dims, &mut noise_rng);
            let (terms, mut grad) = empirical_cost_grad(&model, &batch, &noise, config.s, config.no_reg).map_err(|e| {
                DibError::Training(format!("epoch {epoch}, minibatch {b}, after {} completed epochs: {e}", records.len()))
            })?;
            cost_sum += terms.cost * chunk.len() as f64;
            grad.iter_mut().for_each(|g| *g = -*g);
            adam.update(model.params_mut(), &grad, lr);
        }
        let train_cost = empirical_cost(&model, &monitor_batch, &monitor_noise, config.s, config.no_reg)
            .map_err(|e| DibError::Training(format!("epoch {epoch}, end-of-epoch evaluation: {e}")))?
            .cost;
        let mut rec = EpochRecord {
            epoch,
            cost: cost_sum / train.n() as f64,
            train_cost,
            delta_train: None,
            r_train: None,
            delta_test: None,
            r_test: None,
        };
        if (epoch + 1) % config.eval_every == 0 || epoch + 1 == config.epochs {
            let tr = estimate_pair_rows(&model, train, h_train, config.mc_eval, config.seed, eval_rows)?;
            rec.delta_train = Some(tr.relevance);
            rec.r_train = Some(tr.sum_complexity);
            if let (Some(t), Some(h)) = (test, h_test) {
                let te = estimate_pair_rows(&model, t, h, config.mc_eval, config.seed, eval_rows)?;
                rec.delta_test = Some(te.relevance);
                rec.r_test = Some(te.sum_complexity);
            }
        }
        records.push(rec);
    }
    Ok((
        model,
        TrainTrace {
            records,
            target_entropy_train: h_train,
            target_entropy_test: h_test,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictMode {
    OneShot,
    Averaged { draws: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    /// Argmax labels and the (averaged) class probabilities, one row per sample.
    Labels { labels: Vec<usize>, probs: DMatrix<f64> },
    /// Decoder mean heads (averaged), one row per sample.
    Regression { means: DMatrix<f64> },
}

impl Prediction {
    pub fn accuracy(&self, ds: &MultiviewDataset) -> Option<f64> {
        match (self, ds.targets()) {
            (Prediction::Labels { labels, .. }, Targets::Labels { labels: truth, .. }) => {
                let hits = labels.iter().zip(truth).filter(|(p, t)| **p as i64 == **t).count();
                Some(hits as f64 / truth.len() as f64)
            }
            _ => None,
        }
    }

    pub fn mean_squared_error(&self, ds: &MultiviewDataset) -> Option<f64> {
        match (self, ds.targets()) {
            (Prediction::Regression { means }, Targets::Real { dim, values }) => {
                let n = means.nrows();
                let sse: f64 = (0..n)
                    .flat_map(|i| (0..*dim).map(move |c| (i, c)))
                    .map(|(i, c)| (means[(i, c)] - values[i * dim + c]).powi(2))
                    .sum();
                Some(sse / n as f64)
            }
            _ => None,
        }
    }
}

/// Predicts the target of every row of `ds` through the joint decoder.
pub fn predict(model: &DvibModel, ds: &MultiviewDataset, mode: PredictMode, seed: u64) -> Result<Prediction> {
    let draws = match mode {
        PredictMode::OneShot => 1,
        PredictMode::Averaged { draws } if draws >= 1 => draws,
        PredictMode::Averaged { .. } => return Err(DibError::Usage("averaged prediction needs at least one draw".into())),
    };
    let arch = model.arch();
    let width = arch.target.head_width();
    let n = ds.n();
    let mut acc = DMatrix::zeros(n, width);
    let mut rng = SeededRng::with_stream(seed, derive_stream(STREAM_EVAL_NOISE, 1));
    let mut start = 0;
    while start < n {
        let end = (start + EVAL_CHUNK).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let batch = Batch::from_dataset(ds, &idx)?;
        let b = idx.len();
        let noise = NoiseBlock::draw(b, draws, &arch.latent_dims, &mut rng);
        let total: usize = arch.latent_dims.iter().sum();
        let mut joint = DMatrix::zeros(b * draws, total);
        let mut col = 0;
        for k in 0..arch.num_views() {
            let (out, _) = model.layout().encoder(k).forward(model.params(), &batch.views[k])?;
            let d = arch.latent_dims[k];
            for r in 0..b * draws {
                let i = r % b;
                for c in 0..d {
                    let lv = clamp(out[(i, d + c)], ENCODER_LOG_VAR_RANGE).0;
                    joint[(r, col + c)] = out[(i, c)] + (0.5 * lv).exp() * noise.per_encoder[k][(r, c)];
                }
            }
            col += d;
        }
        let (out, _) = model.layout().main_decoder().forward(model.params(), &joint)?;
        for r in 0..b * draws {
            let i = start + r % b;
            match arch.target {
                TargetKind::Categorical { .. } => {
                    let p = softmax(&out.row(r).iter().copied().collect::<Vec<_>>());
                    for (c, v) in p.iter().enumerate() {
                        acc[(i, c)] += v / draws as f64;
                    }
                }
                TargetKind::Gaussian { dim } => {
                    for c in 0..dim {
                        acc[(i, c)] += out[(r, c)] / draws as f64;
                    }
                }
            }
        }
        start = end;
    }
    Ok(match arch.target {
        TargetKind::Categorical { .. } => {
            let labels = (0..n).map(|i| acc.row(i).transpose().argmax().0).collect();
            Prediction::Labels { labels, probs: acc }
        }
        TargetKind::Gaussian { dim } => Prediction::Regression {
            means: acc.columns(0, dim).into_owned(),
        },
    })
}

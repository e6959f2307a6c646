//! Encoders, decoders and the empirical cost with its gradient.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::heads::{clamp, log_sum_exp, DECODER_LOG_VAR_RANGE, ENCODER_LOG_VAR_RANGE};
use super::mlp::{MlpSpec, NetLayout, Tape};
use crate::datagen::{MultiviewDataset, Targets, ViewData};
use crate::error::{DibError, Result};
use crate::rng::SeededRng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetKind {
    Gaussian { dim: usize },
    Categorical { classes: usize },
}

impl TargetKind {
    /// Width of the decoder output layer.
    pub fn head_width(self) -> usize {
        match self {
            TargetKind::Gaussian { dim } => 2 * dim,
            TargetKind::Categorical { classes } => classes,
        }
    }

    pub fn of(targets: &Targets) -> Self {
        match targets {
            Targets::Real { dim, .. } => TargetKind::Gaussian { dim: *dim },
            Targets::Labels { classes, .. } => TargetKind::Categorical { classes: *classes },
        }
    }
}

/// Shapes of every network in the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DvibArch {
    /// Input width per view (alphabet size for one-hot symbol views).
    pub view_inputs: Vec<usize>,
    pub latent_dims: Vec<usize>,
    pub target: TargetKind,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
}

impl DvibArch {
    pub fn num_views(&self) -> usize {
        self.view_inputs.len()
    }

    /// Networks in parameter order: encoders, main decoder, side decoders.
    pub fn layout(&self) -> Result<ParamLayout> {
        let k = self.num_views();
        if k == 0 || self.latent_dims.len() != k {
            return Err(DibError::Dimension(format!(
                "{} views but {} latent dimensions",
                k,
                self.latent_dims.len()
            )));
        }
        if self.target.head_width() == 0 {
            return Err(DibError::Dimension("target head has zero width".into()));
        }
        let mut nets = Vec::with_capacity(2 * k + 1);
        let mut at = 0;
        let mut push = |name: String, spec: MlpSpec, nets: &mut Vec<NetLayout>| -> Result<()> {
            let net = NetLayout::new(name, spec, at)?;
            at = net.end();
            nets.push(net);
            Ok(())
        };
        for i in 0..k {
            let spec = MlpSpec {
                input: self.view_inputs[i],
                hidden: self.encoder_hidden.clone(),
                output: 2 * self.latent_dims[i],
            };
            push(format!("encoder{}", i + 1), spec, &mut nets)?;
        }
        let main = MlpSpec {
            input: self.latent_dims.iter().sum(),
            hidden: self.decoder_hidden.clone(),
            output: self.target.head_width(),
        };
        push("decoder_main".into(), main, &mut nets)?;
        for i in 0..k {
            let spec = MlpSpec {
                input: self.latent_dims[i],
                hidden: self.decoder_hidden.clone(),
                output: self.target.head_width(),
            };
            push(format!("decoder{}", i + 1), spec, &mut nets)?;
        }
        Ok(ParamLayout { nets, total: at })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub nets: Vec<NetLayout>,
    pub total: usize,
}

impl ParamLayout {
    fn views(&self) -> usize {
        (self.nets.len() - 1) / 2
    }

    pub fn encoder(&self, k: usize) -> &NetLayout {
        &self.nets[k]
    }

    pub fn main_decoder(&self) -> &NetLayout {
        &self.nets[self.views()]
    }

    pub fn side_decoder(&self, k: usize) -> &NetLayout {
        &self.nets[self.views() + 1 + k]
    }
}

/// Architecture plus its flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DvibModel {
    arch: DvibArch,
    layout: ParamLayout,
    params: Vec<f64>,
}

impl DvibModel {
    /// Glorot-initialized model.
    pub fn init(arch: DvibArch, rng: &mut SeededRng) -> Result<Self> {
        let layout = arch.layout()?;
        let mut params = vec![0.0; layout.total];
        for net in &layout.nets {
            net.init(&mut params, rng);
        }
        Ok(DvibModel { arch, layout, params })
    }

    pub fn from_params(arch: DvibArch, params: Vec<f64>) -> Result<Self> {
        let layout = arch.layout()?;
        if params.len() != layout.total {
            return Err(DibError::Dimension(format!(
                "architecture has {} parameters, got {}",
                layout.total,
                params.len()
            )));
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(DibError::Numerical(format!("parameter {i} is not finite")));
        }
        Ok(DvibModel { arch, layout, params })
    }

    pub fn arch(&self) -> &DvibArch {
        &self.arch
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Encoder heads `(mu, log_var)` for view `k`, log-variance clamped.
    pub fn encode(&self, k: usize, x: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (out, _) = self.layout.encoder(k).forward(&self.params, x)?;
        let d = self.arch.latent_dims[k];
        let mu = out.columns(0, d).into_owned();
        let lv = out.columns(d, d).map(|v| clamp(v, ENCODER_LOG_VAR_RANGE).0);
        Ok((mu, lv))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BatchTargets {
    Real(DMatrix<f64>),
    Labels(Vec<usize>),
}

/// Rows of a dataset as network inputs; symbol views are one-hot encoded.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub views: Vec<DMatrix<f64>>,
    pub targets: BatchTargets,
}

impl Batch {
    pub fn from_dataset(ds: &MultiviewDataset, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(DibError::Usage("empty batch".into()));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= ds.n()) {
            return Err(DibError::Dimension(format!("row {bad} out of range for {} samples", ds.n())));
        }
        let b = idx.len();
        let views = ds
            .views()
            .iter()
            .map(|v| match v {
                ViewData::Real { dim, values } => DMatrix::from_fn(b, *dim, |r, c| values[idx[r] * dim + c]),
                ViewData::Symbols { alphabet, symbols } => {
                    let mut m = DMatrix::zeros(b, *alphabet);
                    for (r, &i) in idx.iter().enumerate() {
                        m[(r, symbols[i] as usize)] = 1.0;
                    }
                    m
                }
            })
            .collect();
        let targets = match ds.targets() {
            Targets::Real { dim, values } => {
                BatchTargets::Real(DMatrix::from_fn(b, *dim, |r, c| values[idx[r] * dim + c]))
            }
            Targets::Labels { labels, .. } => BatchTargets::Labels(idx.iter().map(|&i| labels[i] as usize).collect()),
        };
        Ok(Batch { views, targets })
    }

    pub fn len(&self) -> usize {
        self.views[0].nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Input widths the model needs for a dataset's views.
pub fn view_input_widths(ds: &MultiviewDataset) -> Vec<usize> {
    ds.views()
        .iter()
        .map(|v| match v {
            ViewData::Real { dim, .. } => *dim,
            ViewData::Symbols { alphabet, .. } => *alphabet,
        })
        .collect()
}

/// Standard-normal draws for every encoder. Row `j * batch + i` is draw `j`
/// for sample `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBlock {
    pub draws: usize,
    pub per_encoder: Vec<DMatrix<f64>>,
}

impl NoiseBlock {
    pub fn draw(batch: usize, draws: usize, latent_dims: &[usize], rng: &mut SeededRng) -> Self {
        let per_encoder = latent_dims
            .iter()
            .map(|&d| {
                let mut m = DMatrix::zeros(batch * draws, d);
                // row-major fill keeps a draw's coordinates adjacent in the stream
                for r in 0..batch * draws {
                    for c in 0..d {
                        m[(r, c)] = rng.normal();
                    }
                }
                m
            })
            .collect();
        NoiseBlock { draws, per_encoder }
    }

    pub fn zeros(batch: usize, draws: usize, latent_dims: &[usize]) -> Self {
        NoiseBlock {
            draws,
            per_encoder: latent_dims.iter().map(|&d| DMatrix::zeros(batch * draws, d)).collect(),
        }
    }
}

/// Batch means of the pieces of the empirical cost, in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTerms {
    pub cost: f64,
    /// Mean log-likelihood of the target under the joint decoder.
    pub main_log_lik: f64,
    pub side_log_lik: Vec<f64>,
    pub kl: Vec<f64>,
}

/// Empirical cost (to be maximized) on a batch with fixed noise.
pub fn empirical_cost(model: &DvibModel, batch: &Batch, noise: &NoiseBlock, s: f64, no_reg: bool) -> Result<CostTerms> {
    evaluate(model, batch, noise, s, no_reg, None)
}

/// Empirical cost and its gradient with respect to every parameter.
pub fn empirical_cost_grad(
    model: &DvibModel,
    batch: &Batch,
    noise: &NoiseBlock,
    s: f64,
    no_reg: bool,
) -> Result<(CostTerms, Vec<f64>)> {
    let mut grad = vec![0.0; model.layout.total];
    let terms = evaluate(model, batch, noise, s, no_reg, Some(&mut grad))?;
    Ok((terms, grad))
}

/// Empirical cost with `m` fresh draws from `SeededRng::new(seed)`.
pub fn empirical_cost_seeded(model: &DvibModel, batch: &Batch, s: f64, m: usize, seed: u64, no_reg: bool) -> Result<CostTerms> {
    if m == 0 {
        return Err(DibError::Usage("need at least one Monte-Carlo draw".into()));
    }
    let noise = NoiseBlock::draw(batch.len(), m, &model.arch.latent_dims, &mut SeededRng::new(seed));
    empirical_cost(model, batch, &noise, s, no_reg)
}

struct EncoderPass {
    tape: Tape,
    mu: DMatrix<f64>,
    log_var: DMatrix<f64>,
    in_range: DMatrix<bool>,
    latent: DMatrix<f64>,
}

fn evaluate(
    model: &DvibModel,
    batch: &Batch,
    noise: &NoiseBlock,
    s: f64,
    no_reg: bool,
    mut grad: Option<&mut Vec<f64>>,
) -> Result<CostTerms> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(DibError::Usage(format!("s must be finite and >= 0, got {s}")));
    }
    let arch = &model.arch;
    let k_views = arch.num_views();
    let b = batch.len();
    let m = noise.draws;
    if batch.views.len() != k_views || noise.per_encoder.len() != k_views || m == 0 {
        return Err(DibError::Dimension("batch, noise and model disagree on the number of views".into()));
    }
    let rows = b * m;
    let params = &model.params;

    let mut passes = Vec::with_capacity(k_views);
    for k in 0..k_views {
        let d = arch.latent_dims[k];
        let eps = &noise.per_encoder[k];
        if eps.shape() != (rows, d) {
            return Err(DibError::Dimension(format!(
                "noise for encoder {} is {:?}, expected {:?}",
                k + 1,
                eps.shape(),
                (rows, d)
            )));
        }
        let (out, tape) = model.layout.encoder(k).forward(params, &batch.views[k])?;
        let mu = out.columns(0, d).into_owned();
        let mut in_range = DMatrix::from_element(b, d, true);
        let log_var = DMatrix::from_fn(b, d, |i, c| {
            let (v, ok) = clamp(out[(i, d + c)], ENCODER_LOG_VAR_RANGE);
            in_range[(i, c)] = ok;
            v
        });
        let latent = DMatrix::from_fn(rows, d, |r, c| {
            let i = r % b;
            mu[(i, c)] + (0.5 * log_var[(i, c)]).exp() * eps[(r, c)]
        });
        passes.push(EncoderPass {
            tape,
            mu,
            log_var,
            in_range,
            latent,
        });
    }

    let kl: Vec<f64> = passes
        .iter()
        .map(|p| {
            0.5 * p
                .mu
                .iter()
                .zip(p.log_var.iter())
                .map(|(m, lv)| lv.exp() + m * m - 1.0 - lv)
                .sum::<f64>()
                / b as f64
        })
        .collect();

    let total_latent: usize = arch.latent_dims.iter().sum();
    let mut joint = DMatrix::zeros(rows, total_latent);
    let mut col = 0;
    for p in &passes {
        joint.columns_mut(col, p.latent.ncols()).copy_from(&p.latent);
        col += p.latent.ncols();
    }

    let main_net = model.layout.main_decoder();
    let (main_out, main_tape) = main_net.forward(params, &joint)?;
    let (main_ll, d_main_out) = decoder_log_lik(&main_out, &batch.targets, b, grad.is_some())?;

    let side_weight = if no_reg { 0.0 } else { s };
    let mut side_ll = Vec::with_capacity(k_views);
    let mut side_work = Vec::with_capacity(k_views);
    for (k, p) in passes.iter().enumerate() {
        let net = model.layout.side_decoder(k);
        let (out, tape) = net.forward(params, &p.latent)?;
        let (ll, d_out) = decoder_log_lik(&out, &batch.targets, b, grad.is_some() && side_weight > 0.0)?;
        side_ll.push(ll);
        side_work.push((tape, d_out));
    }

    let cost = main_ll + side_weight * side_ll.iter().sum::<f64>() - s * kl.iter().sum::<f64>();
    let terms = CostTerms {
        cost,
        main_log_lik: main_ll,
        side_log_lik: side_ll,
        kl,
    };
    if !cost.is_finite() {
        return Err(DibError::Training(format!("non-finite empirical cost: {terms:?}")));
    }

    if let Some(grad) = grad.as_deref_mut() {
        let inv_rows = 1.0 / rows as f64;
        let d_main = d_main_out.expect("gradient requested") * inv_rows;
        let d_joint = main_net.backward(params, &main_tape, &d_main, grad);
        let mut col = 0;
        for (k, p) in passes.iter().enumerate() {
            let d = arch.latent_dims[k];
            let mut d_latent = d_joint.columns(col, d).into_owned();
            col += d;
            if side_weight > 0.0 {
                let (tape, d_out) = &side_work[k];
                let d_side = d_out.as_ref().expect("gradient requested") * (side_weight * inv_rows);
                d_latent += model.layout.side_decoder(k).backward(params, tape, &d_side, grad);
            }
            let eps = &noise.per_encoder[k];
            let mut d_enc = DMatrix::zeros(b, 2 * d);
            for r in 0..rows {
                let i = r % b;
                for c in 0..d {
                    let g = d_latent[(r, c)];
                    d_enc[(i, c)] += g;
                    d_enc[(i, d + c)] += g * eps[(r, c)] * 0.5 * (0.5 * p.log_var[(i, c)]).exp();
                }
            }
            let kl_scale = s / b as f64;
            for i in 0..b {
                for c in 0..d {
                    d_enc[(i, c)] -= kl_scale * p.mu[(i, c)];
                    d_enc[(i, d + c)] -= kl_scale * 0.5 * (p.log_var[(i, c)].exp() - 1.0);
                    if !p.in_range[(i, c)] {
                        d_enc[(i, d + c)] = 0.0;
                    }
                }
            }
            model.layout.encoder(k).backward(params, &p.tape, &d_enc, grad);
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(DibError::Training(format!("non-finite gradient at parameter {i}")));
        }
    }
    Ok(terms)
}

/// Mean log-likelihood of the (row-repeated) targets under decoder outputs,
/// and optionally its per-row derivative with respect to the outputs
/// (unscaled: row sums, not means).
fn decoder_log_lik(
    out: &DMatrix<f64>,
    targets: &BatchTargets,
    batch: usize,
    want_grad: bool,
) -> Result<(f64, Option<DMatrix<f64>>)> {
    let rows = out.nrows();
    let mut total = 0.0;
    let mut d_out = want_grad.then(|| DMatrix::zeros(rows, out.ncols()));
    match targets {
        BatchTargets::Real(y) => {
            let dim = y.ncols();
            if out.ncols() != 2 * dim {
                return Err(DibError::Dimension(format!("decoder emits {} values for a {dim}-dim target", out.ncols())));
            }
            for r in 0..rows {
                let i = r % batch;
                for c in 0..dim {
                    let mu = out[(r, c)];
                    let (lv, ok) = clamp(out[(r, dim + c)], DECODER_LOG_VAR_RANGE);
                    let prec = (-lv).exp();
                    let e = y[(i, c)] - mu;
                    total += -0.5 * (LN_2PI + lv + e * e * prec);
                    if let Some(d) = d_out.as_mut() {
                        d[(r, c)] = e * prec;
                        d[(r, dim + c)] = if ok { 0.5 * (e * e * prec - 1.0) } else { 0.0 };
                    }
                }
            }
        }
        BatchTargets::Labels(labels) => {
            let classes = out.ncols();
            let mut row = vec![0.0; classes];
            for r in 0..rows {
                let label = labels[r % batch];
                if label >= classes {
                    return Err(DibError::Dimension(format!("label {label} out of range for {classes} classes")));
                }
                for (c, v) in row.iter_mut().enumerate() {
                    *v = out[(r, c)];
                }
                let lse = log_sum_exp(&row);
                total += row[label] - lse;
                if let Some(d) = d_out.as_mut() {
                    for c in 0..classes {
                        d[(r, c)] = -(row[c] - lse).exp();
                    }
                    d[(r, label)] += 1.0;
                }
            }
        }
    }
    Ok((total / rows as f64, d_out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::DatasetMeta;
    use crate::dvib::heads::{categorical_log_prob, gaussian_log_density, kl_to_standard_normal, CategoricalHead, GaussianHead};

    fn arch(target: TargetKind) -> DvibArch {
        DvibArch {
            view_inputs: vec![2, 3],
            latent_dims: vec![2, 1],
            target,
            encoder_hidden: vec![4],
            decoder_hidden: vec![3],
        }
    }

    fn batch(target: TargetKind, b: usize, rng: &mut SeededRng) -> Batch {
        let views = vec![DMatrix::from_fn(b, 2, |_, _| rng.normal()), DMatrix::from_fn(b, 3, |_, _| rng.normal())];
        let targets = match target {
            TargetKind::Gaussian { dim } => BatchTargets::Real(DMatrix::from_fn(b, dim, |_, _| rng.normal())),
            TargetKind::Categorical { classes } => BatchTargets::Labels((0..b).map(|_| rng.below(classes)).collect()),
        };
        Batch { views, targets }
    }

    #[test]
    fn layout_orders_networks() {
        let l = arch(TargetKind::Categorical { classes: 3 }).layout().unwrap();
        let names: Vec<_> = l.nets.iter().map(|n| n.name.as_str()).collect();
        assert_eq!(names, ["encoder1", "encoder2", "decoder_main", "decoder1", "decoder2"]);
        assert_eq!(l.main_decoder().spec.input, 3);
        assert_eq!(l.side_decoder(1).spec.input, 1);
        assert_eq!(l.nets.last().unwrap().end(), l.total);
        let bad = DvibArch {
            latent_dims: vec![2],
            ..arch(TargetKind::Gaussian { dim: 1 })
        };
        assert!(bad.layout().is_err());
    }

    #[test]
    fn zero_regularizer_keeps_only_main_term() {
        let mut rng = SeededRng::new(1);
        let t = TargetKind::Gaussian { dim: 2 };
        let model = DvibModel::init(arch(t), &mut rng).unwrap();
        let b = batch(t, 7, &mut rng);
        let noise = NoiseBlock::draw(7, 1, &[2, 1], &mut rng);
        let terms = empirical_cost(&model, &b, &noise, 0.0, false).unwrap();
        assert_eq!(terms.cost, terms.main_log_lik);
        let no_reg = empirical_cost(&model, &b, &noise, 0.3, true).unwrap();
        assert!((no_reg.cost - (no_reg.main_log_lik - 0.3 * no_reg.kl.iter().sum::<f64>())).abs() < 1e-12);
    }

    #[test]
    fn perfect_categorical_decoder_has_zero_main_term() {
        let mut rng = SeededRng::new(2);
        let t = TargetKind::Categorical { classes: 3 };
        let mut model = DvibModel::init(arch(t), &mut rng).unwrap();
        // main decoder ignores its input and puts all mass on class 2
        let main = model.layout().main_decoder().clone();
        for l in &main.layers {
            model.params_mut()[l.weights..l.biases + l.outputs].iter_mut().for_each(|p| *p = 0.0);
        }
        let last = main.layers.last().unwrap();
        model.params_mut()[last.biases + 2] = 1e3;
        let b = Batch {
            targets: BatchTargets::Labels(vec![2; 5]),
            ..batch(t, 5, &mut rng)
        };
        let noise = NoiseBlock::draw(5, 1, &[2, 1], &mut rng);
        assert_eq!(empirical_cost(&model, &b, &noise, 0.0, false).unwrap().main_log_lik, 0.0);
    }

    #[test]
    fn matches_per_sample_recomputation() {
        for t in [TargetKind::Gaussian { dim: 2 }, TargetKind::Categorical { classes: 4 }] {
            let mut rng = SeededRng::new(3);
            let model = DvibModel::init(arch(t), &mut rng).unwrap();
            let (b, m, s) = (5, 3, 0.7);
            let batch = batch(t, b, &mut rng);
            let noise = NoiseBlock::draw(b, m, &[2, 1], &mut rng);
            let terms = empirical_cost(&model, &batch, &noise, s, false).unwrap();
            let terms2 = empirical_cost(&model, &batch, &noise, s, false).unwrap();
            assert_eq!(terms.cost.to_bits(), terms2.cost.to_bits());

            let p = model.params();
            let l = model.layout();
            let row_of = |mat: &DMatrix<f64>, r: usize| DMatrix::from_row_slice(1, mat.ncols(), &mat.row(r).iter().copied().collect::<Vec<_>>());
            let ll = |out: &DMatrix<f64>, i: usize| match (&batch.targets, t) {
                (BatchTargets::Real(y), TargetKind::Gaussian { dim }) => {
                    let head = GaussianHead {
                        mu: (0..dim).map(|c| out[(0, c)]).collect(),
                        log_var: (0..dim).map(|c| out[(0, dim + c)].clamp(-10.0, 10.0)).collect(),
                    };
                    gaussian_log_density(&y.row(i).iter().copied().collect::<Vec<_>>(), &head)
                }
                (BatchTargets::Labels(lab), _) => categorical_log_prob(
                    lab[i],
                    &CategoricalHead {
                        logits: out.iter().copied().collect(),
                    },
                ),
                _ => unreachable!(),
            };
            let mut total = 0.0;
            for i in 0..b {
                let mut heads = Vec::new();
                for k in 0..2 {
                    let (out, _) = l.encoder(k).forward(p, &row_of(&batch.views[k], i)).unwrap();
                    let d = model.arch().latent_dims[k];
                    heads.push(GaussianHead {
                        mu: (0..d).map(|c| out[(0, c)]).collect(),
                        log_var: (0..d).map(|c| out[(0, d + c)].clamp(-15.0, 15.0)).collect(),
                    });
                }
                let mut inner = 0.0;
                for j in 0..m {
                    let r = j * b + i;
                    let us: Vec<Vec<f64>> = (0..2)
                        .map(|k| crate::dvib::reparam_sample(&heads[k], &noise.per_encoder[k].row(r).iter().copied().collect::<Vec<_>>()))
                        .collect();
                    let joint: Vec<f64> = us.concat();
                    let (main, _) = l.main_decoder().forward(p, &DMatrix::from_row_slice(1, joint.len(), &joint)).unwrap();
                    let mut v = ll(&main, i);
                    for k in 0..2 {
                        let (side, _) = l.side_decoder(k).forward(p, &DMatrix::from_row_slice(1, us[k].len(), &us[k])).unwrap();
                        v += s * ll(&side, i);
                    }
                    inner += v / m as f64;
                }
                total += inner - s * heads.iter().map(kl_to_standard_normal).sum::<f64>();
            }
            assert!((terms.cost - total / b as f64).abs() < 1e-10, "{} vs {}", terms.cost, total / b as f64);
        }
    }

    #[test]
    fn one_hot_symbol_views() {
        let ds = MultiviewDataset::new(
            vec![ViewData::Symbols {
                alphabet: 3,
                symbols: vec![2, 0, 1],
            }],
            Targets::Labels {
                classes: 2,
                labels: vec![1, 0, 1],
            },
            DatasetMeta {
                generator: "t".into(),
                seed: 0,
                field: Default::default(),
                target_entropy: None,
                model: None,
            },
        )
        .unwrap();
        let b = Batch::from_dataset(&ds, &[0, 2]).unwrap();
        assert_eq!(b.views[0], DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 1.0, 0.0, 1.0, 0.0]));
        assert_eq!(b.targets, BatchTargets::Labels(vec![1, 1]));
        assert_eq!(view_input_widths(&ds), vec![3]);
        assert!(Batch::from_dataset(&ds, &[3]).is_err());
    }
}

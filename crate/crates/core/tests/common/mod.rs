//! Finite-difference gradient check shared by the trainer tests and the
//! acceptance suite.

use dib_core::dvib::*;
use dib_core::rng::SeededRng;
use nalgebra::DMatrix;

pub const FD_STEP: f64 = 1e-5;
pub const FD_RTOL: f64 = 1e-4;
/// Absolute floor at the finite-difference round-off level.
pub const FD_ATOL: f64 = 1e-8;
const KINK_MARGIN: f64 = 1e-3;

pub fn random_batch(arch: &DvibArch, b: usize, rng: &mut SeededRng) -> Batch {
    let views = arch.view_inputs.iter().map(|&w| DMatrix::from_fn(b, w, |_, _| rng.normal())).collect();
    let targets = match arch.target {
        TargetKind::Gaussian { dim } => BatchTargets::Real(DMatrix::from_fn(b, dim, |_, _| rng.normal())),
        TargetKind::Categorical { classes } => BatchTargets::Labels((0..b).map(|_| rng.below(classes)).collect()),
    };
    Batch { views, targets }
}

/// Distance of every network input in the cost graph from a rectifier kink.
pub fn graph_margin(model: &DvibModel, batch: &Batch, noise: &NoiseBlock) -> f64 {
    let arch = model.arch();
    let layout = model.layout();
    let p = model.params();
    let rows = batch.len() * noise.draws;
    let mut margin = f64::INFINITY;
    let mut joint = DMatrix::zeros(rows, arch.latent_dims.iter().sum());
    let mut col = 0;
    for k in 0..arch.num_views() {
        margin = margin.min(layout.encoder(k).relu_margin(p, &batch.views[k]).unwrap());
        let (mu, lv) = model.encode(k, &batch.views[k]).unwrap();
        let d = arch.latent_dims[k];
        let u = DMatrix::from_fn(rows, d, |r, c| {
            let i = r % batch.len();
            mu[(i, c)] + (0.5 * lv[(i, c)]).exp() * noise.per_encoder[k][(r, c)]
        });
        margin = margin.min(layout.side_decoder(k).relu_margin(p, &u).unwrap());
        joint.columns_mut(col, d).copy_from(&u);
        col += d;
    }
    margin.min(layout.main_decoder().relu_margin(p, &joint).unwrap())
}

#[derive(Debug, Clone, Default)]
pub struct FdReport {
    pub nets: usize,
    pub gaussian_heads: usize,
    pub categorical_heads: usize,
    pub params: usize,
    /// Largest `|analytic - fd| / max(|analytic|, |fd|)` over entries above 1e-6.
    pub max_rel: f64,
    /// Entries with `|analytic - fd| > FD_RTOL * scale + FD_ATOL`.
    pub violations: Vec<String>,
}

/// Central differences against the analytic gradient on `count` random small
/// networks, alternating Gaussian and categorical heads, with the
/// reparameterization noise held fixed. Draws whose graph sits within 1e-3 of
/// a rectifier kink are redrawn.
pub fn fd_check_random_nets(seed: u64, count: usize) -> FdReport {
    let mut rng = SeededRng::new(seed);
    let mut report = FdReport::default();
    while report.nets < count {
        let k = 1 + rng.below(2);
        let gaussian = report.nets % 2 == 0;
        let target = if gaussian {
            TargetKind::Gaussian { dim: 1 + rng.below(2) }
        } else {
            TargetKind::Categorical { classes: 2 + rng.below(3) }
        };
        let arch = DvibArch {
            view_inputs: (0..k).map(|_| 1 + rng.below(3)).collect(),
            latent_dims: (0..k).map(|_| 1 + rng.below(2)).collect(),
            target,
            encoder_hidden: vec![2 + rng.below(5); rng.below(3)],
            decoder_hidden: vec![2 + rng.below(5); rng.below(2)],
        };
        let mut model = DvibModel::init(arch.clone(), &mut rng).unwrap();
        // non-zero biases so every parameter carries gradient signal
        for v in model.params_mut() {
            *v += 0.1 * rng.normal();
        }
        let (b, m) = (2 + rng.below(3), 1 + rng.below(3));
        let batch = random_batch(&arch, b, &mut rng);
        let noise = NoiseBlock::draw(b, m, &arch.latent_dims, &mut rng);
        if graph_margin(&model, &batch, &noise) < KINK_MARGIN {
            continue;
        }
        let s = 2.0 * rng.uniform();
        let no_reg = rng.below(4) == 0;
        let (_, grad) = empirical_cost_grad(&model, &batch, &noise, s, no_reg).unwrap();
        let base = model.params().to_vec();
        let eval = |i: usize, delta: f64| {
            let mut p = base.clone();
            p[i] += delta;
            let m2 = DvibModel::from_params(arch.clone(), p).unwrap();
            empirical_cost(&m2, &batch, &noise, s, no_reg).unwrap().cost
        };
        for i in 0..base.len() {
            let fd = (eval(i, FD_STEP) - eval(i, -FD_STEP)) / (2.0 * FD_STEP);
            let err = (grad[i] - fd).abs();
            let scale = grad[i].abs().max(fd.abs());
            if err > FD_RTOL * scale + FD_ATOL {
                report.violations.push(format!("net {}, param {i}: analytic {} vs fd {fd}", report.nets, grad[i]));
            }
            if scale > 1e-6 {
                report.max_rel = report.max_rel.max(err / scale);
            }
        }
        report.params += base.len();
        if gaussian {
            report.gaussian_heads += 1;
        } else {
            report.categorical_heads += 1;
        }
        report.nets += 1;
    }
    report
}

//! Alternating maximization restricted to linear Gaussian encoders
//! `U_k = A_k X_k + Z_k`, `Z_k ~ N(0, Sigma_z_k)`.
//!
//! Each block update, with `D_1 = Sigma_{u_k|y}^{-1}` and
//! `D_2 = Sigma_{u_k|u_rest}^{-1}`:
//!
//! ```text
//! Sigma_z <- ((1 + 1/s) D_1 - (1/s) D_2)^{-1}
//! A       <- Sigma_z [(1 + 1/s) D_1 A (I - Sigma_{x_k|y} Sigma_{x_k}^{-1})
//!                     - (1/s) D_2 A (I - Sigma_{x_k|u_rest} Sigma_{x_k}^{-1})]
//! ```
//!
//! Blocks are refreshed in index order against the already-updated earlier
//! blocks.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::discrete_ba::RelevanceComplexity;
use crate::error::{DibError, Result};
use crate::info::linalg::{inverse_spd, logdet_spd, max_asymmetry, min_eigenvalue, serde_rows, symmetrize, PSD_TOL, SYM_TOL};
use crate::info::{FieldFactor, LinearGaussianModel};
use crate::rng::{derive_stream, SeededRng};
use crate::tradeoff::TradeoffPoint;

/// Per-view encoders `(A_k, Sigma_z_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianEncoderSet {
    #[serde(with = "serde_rows::vec")]
    a: Vec<DMatrix<f64>>,
    #[serde(with = "serde_rows::vec")]
    sigma_z: Vec<DMatrix<f64>>,
}

impl GaussianEncoderSet {
    pub fn new(a: Vec<DMatrix<f64>>, sigma_z: Vec<DMatrix<f64>>) -> Result<Self> {
        if a.is_empty() || a.len() != sigma_z.len() {
            return Err(DibError::Dimension(format!(
                "{} projections and {} noise covariances",
                a.len(),
                sigma_z.len()
            )));
        }
        for (k, (ak, zk)) in a.iter().zip(&sigma_z).enumerate() {
            if !ak.is_square() || zk.shape() != ak.shape() {
                return Err(DibError::Dimension(format!("encoder {k}: A and Sigma_z must be square and equal-sized")));
            }
            if max_asymmetry(zk) > SYM_TOL || min_eigenvalue(zk) < -PSD_TOL {
                return Err(DibError::InvalidDistribution(format!(
                    "encoder {k}: noise covariance must be symmetric PSD"
                )));
            }
        }
        Ok(GaussianEncoderSet { a, sigma_z })
    }

    /// `A_k` entries iid standard normal, `Sigma_z_k = I`.
    pub fn random(model: &LinearGaussianModel, rng: &mut SeededRng) -> Self {
        let dims = model.view_dims();
        GaussianEncoderSet {
            a: dims
                .iter()
                .map(|&n| DMatrix::from_row_iterator(n, n, (0..n * n).map(|_| rng.normal()).collect::<Vec<_>>()))
                .collect(),
            sigma_z: dims.iter().map(|&n| DMatrix::identity(n, n)).collect(),
        }
    }

    /// `A_k = 0`, `Sigma_z_k = I`: encoders that ignore their input.
    pub fn silent(model: &LinearGaussianModel) -> Self {
        let dims = model.view_dims();
        GaussianEncoderSet {
            a: dims.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
            sigma_z: dims.iter().map(|&n| DMatrix::identity(n, n)).collect(),
        }
    }

    pub fn a(&self, k: usize) -> &DMatrix<f64> {
        &self.a[k]
    }

    pub fn sigma_z(&self, k: usize) -> &DMatrix<f64> {
        &self.sigma_z[k]
    }

    pub fn num_encoders(&self) -> usize {
        self.a.len()
    }

    /// Smallest eigenvalue over all noise covariances.
    pub fn min_noise_eigenvalue(&self) -> f64 {
        self.sigma_z.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    /// Frobenius norm of the stacked parameter difference.
    pub fn distance(&self, other: &GaussianEncoderSet) -> f64 {
        let mut sq = 0.0;
        for k in 0..self.a.len() {
            sq += (&self.a[k] - &other.a[k]).norm_squared() + (&self.sigma_z[k] - &other.sigma_z[k]).norm_squared();
        }
        sq.sqrt()
    }

    fn check_against(&self, model: &LinearGaussianModel) -> Result<()> {
        let dims = model.view_dims();
        if self.a.len() != dims.len() || self.a.iter().zip(&dims).any(|(a, &n)| a.nrows() != n) {
            return Err(DibError::Dimension("encoders do not match the model views".into()));
        }
        Ok(())
    }
}

fn block_offsets(dims: &[usize], start: usize) -> Vec<usize> {
    let mut off = start;
    dims.iter()
        .map(|&d| {
            let o = off;
            off += d;
            o
        })
        .collect()
}

/// Covariance of `(Y, U_1, ..., U_K)` induced by the encoders.
pub fn induced_covariance(model: &LinearGaussianModel, enc: &GaussianEncoderSet) -> Result<DMatrix<f64>> {
    enc.check_against(model)?;
    let ny = model.n_y();
    let dims = model.view_dims();
    let offs = block_offsets(&dims, ny);
    let total = ny + dims.iter().sum::<usize>();
    let mut out = DMatrix::zeros(total, total);
    out.view_mut((0, 0), (ny, ny)).copy_from(model.sigma_y());
    for j in 0..dims.len() {
        let yu = model.cov_y_x(j) * enc.a[j].transpose();
        out.view_mut((0, offs[j]), (ny, dims[j])).copy_from(&yu);
        out.view_mut((offs[j], 0), (dims[j], ny)).copy_from(&yu.transpose());
        for k in 0..dims.len() {
            let mut b = &enc.a[j] * model.cross_cov(j, k) * enc.a[k].transpose();
            if j == k {
                b += &enc.sigma_z[k];
            }
            out.view_mut((offs[j], offs[k]), (dims[j], dims[k])).copy_from(&b);
        }
    }
    Ok(symmetrize(&out))
}

/// `ln|Sigma_aa| - ln|Sigma_{a|b}|` for index blocks `a`, `b` of `cov`,
/// i.e. the mutual information divided by the field factor.
fn log_det_ratio(cov: &DMatrix<f64>, a: &[usize], b: &[usize]) -> Result<f64> {
    let pick = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |i, j| cov[(rows[i], cols[j])]);
    let saa = pick(a, a);
    let sbb = pick(b, b);
    let sab = pick(a, b);
    let cond = symmetrize(&(&saa - &sab * inverse_spd(&sbb, "conditioning covariance")? * sab.transpose()));
    Ok(logdet_spd(&saa, "marginal covariance")? - logdet_spd(&cond, "conditional covariance")?)
}

struct Informations {
    relevance: f64,
    side_relevance: Vec<f64>,
    encoder_info: Vec<f64>,
}

fn informations(model: &LinearGaussianModel, enc: &GaussianEncoderSet, field: FieldFactor) -> Result<Informations> {
    let cov = induced_covariance(model, enc)?;
    let ny = model.n_y();
    let dims = model.view_dims();
    let offs = block_offsets(&dims, ny);
    let c = field.c();
    let y: Vec<usize> = (0..ny).collect();
    let all_u: Vec<usize> = (ny..cov.nrows()).collect();
    let relevance = c * log_det_ratio(&cov, &y, &all_u)?;
    let mut side_relevance = Vec::with_capacity(dims.len());
    let mut encoder_info = Vec::with_capacity(dims.len());
    for k in 0..dims.len() {
        let uk: Vec<usize> = (offs[k]..offs[k] + dims[k]).collect();
        side_relevance.push(c * log_det_ratio(&cov, &y, &uk)?);
        let s_u = cov.view((offs[k], offs[k]), (dims[k], dims[k])).into_owned();
        encoder_info.push(c * (logdet_spd(&s_u, "latent covariance")? - logdet_spd(&enc.sigma_z[k], "encoder noise")?));
    }
    Ok(Informations {
        relevance: relevance.max(0.0),
        side_relevance,
        encoder_info,
    })
}

/// `Delta = I(Y; U_K)` and `R = Delta + sum_k [I(X_k; U_k) - I(Y; U_k)]`
/// from log-determinants of the induced covariance.
pub fn evaluate_gauss_pair(
    model: &LinearGaussianModel,
    enc: &GaussianEncoderSet,
    field: FieldFactor,
) -> Result<RelevanceComplexity> {
    let inf = informations(model, enc, field)?;
    let extra: f64 = inf.encoder_info.iter().zip(&inf.side_relevance).map(|(a, b)| a - b).sum();
    Ok(RelevanceComplexity {
        relevance: inf.relevance,
        sum_complexity: (inf.relevance + extra).max(0.0),
    })
}

/// `L_s = -h(Y|U_K) - s sum_k [h(Y|U_k) + I(X_k;U_k)]` in closed form.
pub fn gauss_cost(model: &LinearGaussianModel, enc: &GaussianEncoderSet, s: f64, field: FieldFactor) -> Result<f64> {
    let inf = informations(model, enc, field)?;
    let h_y = field.entropy(model.sigma_y());
    let mut reg = 0.0;
    for k in 0..enc.num_encoders() {
        reg += h_y - inf.side_relevance[k] + inf.encoder_info[k];
    }
    Ok(-(h_y - inf.relevance) - s * reg)
}

/// `Cov[X_k | U_rest]` under the current encoders.
fn view_given_rest(model: &LinearGaussianModel, enc: &GaussianEncoderSet, k: usize) -> Result<DMatrix<f64>> {
    let dims = model.view_dims();
    let rest: Vec<usize> = (0..dims.len()).filter(|&j| j != k).collect();
    let sx = model.cov_x(k);
    if rest.is_empty() {
        return Ok(sx);
    }
    let rdims: Vec<usize> = rest.iter().map(|&j| dims[j]).collect();
    let offs = block_offsets(&rdims, 0);
    let total: usize = rdims.iter().sum();
    let mut s_rest = DMatrix::zeros(total, total);
    let mut s_xr = DMatrix::zeros(dims[k], total);
    for (p, &i) in rest.iter().enumerate() {
        s_xr.view_mut((0, offs[p]), (dims[k], rdims[p]))
            .copy_from(&(model.cross_cov(k, i) * enc.a[i].transpose()));
        for (q, &j) in rest.iter().enumerate() {
            let mut b = &enc.a[i] * model.cross_cov(i, j) * enc.a[j].transpose();
            if i == j {
                b += &enc.sigma_z[i];
            }
            s_rest.view_mut((offs[p], offs[q]), (rdims[p], rdims[q])).copy_from(&b);
        }
    }
    let s_rest = symmetrize(&s_rest);
    let inv = inverse_spd(&s_rest, "covariance of the other latents")?;
    Ok(symmetrize(&(sx - &s_xr * inv * s_xr.transpose())))
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(DibError::Usage(format!("tradeoff multiplier s must be positive, got {s}")));
    }
    Ok(())
}

/// One sweep of block updates over all encoders.
pub fn ba_gauss_step(model: &LinearGaussianModel, enc: &GaussianEncoderSet, s: f64) -> Result<GaussianEncoderSet> {
    check_s(s)?;
    enc.check_against(model)?;
    let mut cur = enc.clone();
    let w1 = 1.0 + 1.0 / s;
    let w2 = 1.0 / s;
    for k in 0..cur.num_encoders() {
        let n = cur.a[k].nrows();
        let eye = DMatrix::<f64>::identity(n, n);
        let sx = model.cov_x(k);
        let sx_inv = inverse_spd(&sx, "view covariance")?;
        let s_noise = &model.channel(k).sigma;
        let s_rest = view_given_rest(model, &cur, k)?;
        let a = &cur.a[k];
        let u_y = symmetrize(&(a * s_noise * a.transpose() + &cur.sigma_z[k]));
        let u_rest = symmetrize(&(a * &s_rest * a.transpose() + &cur.sigma_z[k]));
        let d1 = inverse_spd(&u_y, "latent covariance given the target")?;
        let d2 = inverse_spd(&u_rest, "latent covariance given the other latents")?;
        let precision = symmetrize(&(&d1 * w1 - &d2 * w2));
        let sz = inverse_spd(&precision, "updated noise precision")?;
        let drive = &d1 * a * (&eye - s_noise * &sx_inv) * w1 - &d2 * a * (&eye - &s_rest * &sx_inv) * w2;
        cur.a[k] = &sz * drive;
        cur.sigma_z[k] = sz;
    }
    Ok(cur)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussBaConfig {
    pub s: f64,
    /// Stop when the Frobenius change of all parameters drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for GaussBaConfig {
    fn default() -> Self {
        GaussBaConfig {
            s: 1.0,
            tol: 1e-10,
            max_iter: 20_000,
            restarts: 3,
            seed: 0,
        }
    }
}

impl GaussBaConfig {
    pub fn with_s(s: f64) -> Self {
        GaussBaConfig { s, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussIterRecord {
    pub iteration: usize,
    pub cost: f64,
    pub change: f64,
    pub min_noise_eigenvalue: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GaussTrace {
    pub records: Vec<GaussIterRecord>,
    pub converged: bool,
    pub iterations: usize,
    pub restart: usize,
    pub restart_costs: Vec<f64>,
    pub failures: Vec<String>,
}

impl GaussTrace {
    /// Largest per-sweep decrease of the cost (zero when monotone).
    pub fn worst_descent(&self) -> f64 {
        self.records.windows(2).map(|w| w[0].cost - w[1].cost).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct GaussSolution {
    pub encoders: GaussianEncoderSet,
    pub point: TradeoffPoint,
    pub cost: f64,
    pub trace: GaussTrace,
}

/// Runs the sweeps from `start`; every iterate is checked to keep PSD noise.
pub fn ba_gauss_run(
    model: &LinearGaussianModel,
    start: GaussianEncoderSet,
    config: &GaussBaConfig,
    field: FieldFactor,
) -> Result<(GaussianEncoderSet, GaussTrace)> {
    check_s(config.s)?;
    let mut enc = start;
    let mut trace = GaussTrace {
        records: vec![GaussIterRecord {
            iteration: 0,
            cost: gauss_cost(model, &enc, config.s, field)?,
            change: f64::NAN,
            min_noise_eigenvalue: enc.min_noise_eigenvalue(),
        }],
        ..Default::default()
    };
    for t in 1..=config.max_iter {
        let next = ba_gauss_step(model, &enc, config.s)?;
        let min_eig = next.min_noise_eigenvalue();
        if min_eig < -PSD_TOL {
            return Err(DibError::Numerical(format!(
                "iteration {t}: encoder noise covariance lost PSD (eigenvalue {min_eig:e})"
            )));
        }
        let change = next.distance(&enc);
        enc = next;
        trace.records.push(GaussIterRecord {
            iteration: t,
            cost: gauss_cost(model, &enc, config.s, field)?,
            change,
            min_noise_eigenvalue: min_eig,
        });
        trace.iterations = t;
        if change < config.tol {
            trace.converged = true;
            break;
        }
    }
    Ok((enc, trace))
}

/// Best of `restarts` runs from random encoders, ranked by the final cost.
pub fn ba_gauss_solve(model: &LinearGaussianModel, config: &GaussBaConfig, field: FieldFactor) -> Result<GaussSolution> {
    check_s(config.s)?;
    if config.restarts == 0 || config.max_iter == 0 || !(config.tol > 0.0) {
        return Err(DibError::Usage("restarts and max_iter must be >= 1 and tol positive".into()));
    }
    let mut best: Option<(GaussianEncoderSet, GaussTrace, f64)> = None;
    let mut costs = Vec::with_capacity(config.restarts);
    let mut failures = Vec::new();
    for r in 0..config.restarts {
        let mut rng = SeededRng::with_stream(config.seed, derive_stream(7, r as u64));
        let start = GaussianEncoderSet::random(model, &mut rng);
        match ba_gauss_run(model, start, config, field) {
            Ok((enc, mut trace)) => {
                let cost = trace.records.last().map_or(f64::NEG_INFINITY, |x| x.cost);
                costs.push(cost);
                trace.restart = r;
                if best.as_ref().map_or(true, |b| cost > b.2) {
                    best = Some((enc, trace, cost));
                }
            }
            Err(e) => {
                costs.push(f64::NAN);
                failures.push(format!("restart {r}: {e}"));
            }
        }
    }
    let Some((encoders, mut trace, cost)) = best else {
        return Err(DibError::Solver(format!("every restart failed: {}", failures.join("; "))));
    };
    trace.restart_costs = costs;
    trace.failures = failures;
    let pair = evaluate_gauss_pair(model, &encoders, field)?;
    Ok(GaussSolution {
        point: TradeoffPoint {
            s: config.s,
            relevance: pair.relevance,
            sum_complexity: pair.sum_complexity,
            iterations: trace.iterations,
            converged: trace.converged,
        },
        encoders,
        cost,
        trace,
    })
}

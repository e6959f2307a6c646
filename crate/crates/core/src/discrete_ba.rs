//! Alternating-maximization (Blahut-Arimoto) solver for the distributed
//! information bottleneck on discrete memoryless models.
//!
//! Encoders `P = {p(u_k|x_k)}` and variational decoders/priors
//! `Q = {q(y|u_1..u_K), q(y|u_k), q(u_k)}` are refined in turn:
//!
//! * [`q_update`] sets `Q` to the exact conditionals induced by `P`, which
//!   makes the variational cost equal the true cost;
//! * [`p_update`] sets each encoder to `p(u|x) ∝ q(u) exp(-psi(u, x))`,
//!   sweeping the encoders one after another so each block update is an
//!   exact maximization with the others held fixed.
//!
//! Both steps never decrease the variational cost, so the recorded cost
//! sequence is monotone.

use serde::{Deserialize, Serialize};

use crate::error::{DibError, Result};
use crate::info::discrete::{entropy_of, kl_slices, xlogx};
use crate::info::tensor::{self, for_each_index, marginalize, mode_product, move_axis_to_front};
use crate::info::{ConditionalPmf, DiscretePmf, JointPmf};
use crate::rng::{derive_stream, SeededRng};

/// Smallest accepted tradeoff multiplier; `s -> 0` is approximated by it.
pub const S_MIN: f64 = 1e-6;

/// Stochastic encoders `p(u_k | x_k)`, one per view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderSet {
    encoders: Vec<ConditionalPmf>,
}

impl EncoderSet {
    pub fn new(encoders: Vec<ConditionalPmf>) -> Result<Self> {
        if encoders.is_empty() {
            return Err(DibError::Dimension("need at least one encoder".into()));
        }
        Ok(EncoderSet { encoders })
    }

    /// Every encoder the identity map (`|U_k| = |X_k|`).
    pub fn identity(joint: &JointPmf) -> Self {
        EncoderSet {
            encoders: (0..joint.num_views())
                .map(|k| ConditionalPmf::identity(joint.view_size(k)))
                .collect(),
        }
    }

    /// Encoders ignoring their input: every row equal to `rows[k]`.
    pub fn constant(joint: &JointPmf, rows: &[DiscretePmf]) -> Self {
        EncoderSet {
            encoders: rows
                .iter()
                .enumerate()
                .map(|(k, p)| ConditionalPmf::constant(joint.view_size(k), p))
                .collect(),
        }
    }

    pub fn encoders(&self) -> &[ConditionalPmf] {
        &self.encoders
    }

    pub fn encoder(&self, k: usize) -> &ConditionalPmf {
        &self.encoders[k]
    }

    pub fn num_encoders(&self) -> usize {
        self.encoders.len()
    }

    pub fn latent_dims(&self) -> Vec<usize> {
        self.encoders.iter().map(ConditionalPmf::cols).collect()
    }

    pub fn max_abs_diff(&self, other: &EncoderSet) -> f64 {
        self.encoders
            .iter()
            .zip(&other.encoders)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    fn check_against(&self, joint: &JointPmf) -> Result<()> {
        if self.encoders.len() != joint.num_views() {
            return Err(DibError::Dimension(format!(
                "{} encoders for {} views",
                self.encoders.len(),
                joint.num_views()
            )));
        }
        for (k, e) in self.encoders.iter().enumerate() {
            if e.rows() != joint.view_size(k) {
                return Err(DibError::Dimension(format!(
                    "encoder {k} has {} rows, view alphabet has {}",
                    e.rows(),
                    joint.view_size(k)
                )));
            }
        }
        Ok(())
    }
}

/// Variational decoders and latent priors.
///
/// `main` has one row per latent tuple `(u_1, ..., u_K)` in row-major order
/// (last encoder fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderSet {
    pub main: ConditionalPmf,
    pub side: Vec<ConditionalPmf>,
    pub priors: Vec<DiscretePmf>,
}

impl DecoderSet {
    fn check_against(&self, latent_dims: &[usize], ny: usize) -> Result<()> {
        let tuples: usize = latent_dims.iter().product();
        let ok = self.main.rows() == tuples
            && self.main.cols() == ny
            && self.side.len() == latent_dims.len()
            && self.priors.len() == latent_dims.len()
            && self
                .side
                .iter()
                .zip(latent_dims)
                .all(|(d, &n)| d.rows() == n && d.cols() == ny)
            && self.priors.iter().zip(latent_dims).all(|(p, &n)| p.len() == n);
        if ok {
            Ok(())
        } else {
            Err(DibError::Dimension("decoder shapes do not match the encoders".into()))
        }
    }
}

/// Distributions induced by a set of encoders on a joint model.
#[derive(Debug, Clone)]
pub struct Marginals {
    latent_dims: Vec<usize>,
    ny: usize,
    /// `p(u_1, ..., u_K, y)`, row-major.
    joint_uy: Vec<f64>,
    p_y: Vec<f64>,
    /// `p(u_k)`.
    p_u: Vec<Vec<f64>>,
    /// `p(u_k, y)`, row-major `|U_k| x |Y|`.
    p_uy: Vec<Vec<f64>>,
}

fn conditional_rows(joint_rows: &[f64], rows: usize, cols: usize, fallback: &[f64]) -> ConditionalPmf {
    let mut table = vec![0.0; rows * cols];
    for r in 0..rows {
        let row = &joint_rows[r * cols..(r + 1) * cols];
        let mass: f64 = row.iter().sum();
        let dst = &mut table[r * cols..(r + 1) * cols];
        if mass > 0.0 {
            for (d, v) in dst.iter_mut().zip(row) {
                *d = v / mass;
            }
        } else {
            dst.copy_from_slice(fallback);
        }
    }
    ConditionalPmf::new_unchecked(rows, cols, table)
}

impl Marginals {
    pub fn latent_dims(&self) -> &[usize] {
        &self.latent_dims
    }

    pub fn joint_uy(&self) -> &[f64] {
        &self.joint_uy
    }

    pub fn p_y(&self) -> &[f64] {
        &self.p_y
    }

    pub fn p_u(&self, k: usize) -> &[f64] {
        &self.p_u[k]
    }

    pub fn p_uy(&self, k: usize) -> &[f64] {
        &self.p_uy[k]
    }

    /// `p(y | u_k)`; rows of unreachable symbols are set to `p(y)`.
    pub fn y_given_u(&self, k: usize) -> ConditionalPmf {
        conditional_rows(&self.p_uy[k], self.latent_dims[k], self.ny, &self.p_y)
    }

    /// `p(y | u_1, ..., u_K)`; unreachable tuples get `p(y)`.
    pub fn y_given_all(&self) -> ConditionalPmf {
        let tuples: usize = self.latent_dims.iter().product();
        conditional_rows(&self.joint_uy, tuples, self.ny, &self.p_y)
    }

    /// `I(Y; U_1, ..., U_K)`.
    pub fn relevance(&self) -> f64 {
        let tuples: usize = self.latent_dims.iter().product();
        let p_u: Vec<f64> = (0..tuples)
            .map(|t| self.joint_uy[t * self.ny..(t + 1) * self.ny].iter().sum())
            .collect();
        (entropy_of(&p_u) + entropy_of(&self.p_y) - entropy_of(&self.joint_uy)).max(0.0)
    }

    /// `I(Y; U_k)`.
    pub fn side_relevance(&self, k: usize) -> f64 {
        (entropy_of(&self.p_u[k]) + entropy_of(&self.p_y) - entropy_of(&self.p_uy[k])).max(0.0)
    }

    /// `H(Y | U_1, ..., U_K)`.
    pub fn cond_entropy_all(&self) -> f64 {
        entropy_of(&self.p_y) - self.relevance()
    }

    /// `H(Y | U_k)`.
    pub fn cond_entropy_side(&self, k: usize) -> f64 {
        entropy_of(&self.p_y) - self.side_relevance(k)
    }
}

/// Computes `p(u_K, y)`, `p(u_k)`, `p(u_k, y)` under
/// `p(x_K, y) prod_k p(u_k | x_k)`.
pub fn induced_marginals(p: &EncoderSet, joint: &JointPmf) -> Result<Marginals> {
    p.check_against(joint)?;
    let k = joint.num_views();
    let mut dims = joint.dims().to_vec();
    let mut data = joint.probs().to_vec();
    for (axis, enc) in p.encoders.iter().enumerate() {
        let (d, v) = mode_product(&dims, &data, axis, enc.table(), enc.cols());
        dims = d;
        data = v;
    }
    let ny = joint.y_size();
    let p_y = marginalize(&dims, &data, &[k]);
    let p_u = (0..k).map(|a| marginalize(&dims, &data, &[a])).collect();
    let p_uy = (0..k).map(|a| marginalize(&dims, &data, &[a, k])).collect();
    Ok(Marginals {
        latent_dims: p.latent_dims(),
        ny,
        joint_uy: data,
        p_y,
        p_u,
        p_uy,
    })
}

/// Returns the exact conditionals induced by `P`: the unique maximizer of the
/// variational cost over `Q`.
pub fn q_update(p: &EncoderSet, joint: &JointPmf) -> Result<DecoderSet> {
    let m = induced_marginals(p, joint)?;
    Ok(DecoderSet {
        main: m.y_given_all(),
        side: (0..p.num_encoders()).map(|k| m.y_given_u(k)).collect(),
        priors: m
            .p_u
            .iter()
            .map(|v| DiscretePmf::new(v.clone()))
            .collect::<Result<Vec<_>>>()?,
    })
}

/// Joint `p(x_k, u_{rest}, y)` with the view `k` axis first, then the other
/// latents in encoder order, then `y`.
struct ViewSlice {
    nx: usize,
    rest_count: usize,
    ny: usize,
    data: Vec<f64>,
}

fn view_slice(p: &EncoderSet, joint: &JointPmf, k: usize) -> ViewSlice {
    let mut dims = joint.dims().to_vec();
    let mut data = joint.probs().to_vec();
    for (axis, enc) in p.encoders.iter().enumerate() {
        if axis == k {
            continue;
        }
        let (d, v) = mode_product(&dims, &data, axis, enc.table(), enc.cols());
        dims = d;
        data = v;
    }
    let (dims, data) = move_axis_to_front(&dims, &data, k);
    let nx = dims[0];
    let ny = *dims.last().unwrap();
    let rest_count = data.len() / (nx * ny);
    ViewSlice {
        nx,
        rest_count,
        ny,
        data,
    }
}

/// Flat index of the latent tuple obtained by inserting `u_k` at position
/// `k` into the tuple of the other encoders' symbols (`rest`, row-major).
fn full_tuple_index(latent_dims: &[usize], k: usize, u_k: usize, rest: usize) -> usize {
    let rest_dims: Vec<usize> = latent_dims
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != k)
        .map(|(_, &d)| d)
        .collect();
    let rest_strides = tensor::strides(&rest_dims);
    let full_strides = tensor::strides(latent_dims);
    let mut idx = u_k * full_strides[k];
    let mut slot = 0;
    for j in 0..latent_dims.len() {
        if j == k {
            continue;
        }
        let sym = (rest / rest_strides[slot]) % rest_dims[slot];
        idx += sym * full_strides[j];
        slot += 1;
    }
    idx
}

/// The exponent table `psi(u_k, x_k)`, stored with one row per `x_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiTable {
    pub nx: usize,
    pub nu: usize,
    pub values: Vec<f64>,
}

impl PsiTable {
    pub fn get(&self, u: usize, x: usize) -> f64 {
        self.values[x * self.nu + u]
    }
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(DibError::Usage(format!("tradeoff multiplier s must be positive, got {s}")));
    }
    Ok(())
}

/// `psi(u_k, x_k) = D(p(y|x_k) || q(y|u_k))
///   + (1/s) E_{U_rest|x_k} D(p(y|U_rest, x_k) || q(y|U_rest, u_k))`
/// for every `(u_k, x_k)`. Symbols `x_k` with zero probability get zero.
pub fn psi_table(p: &EncoderSet, q: &DecoderSet, joint: &JointPmf, k: usize, s: f64) -> Result<PsiTable> {
    check_s(s)?;
    p.check_against(joint)?;
    if k >= p.num_encoders() {
        return Err(DibError::Usage(format!("encoder index {k} out of range")));
    }
    let latent_dims = p.latent_dims();
    q.check_against(&latent_dims, joint.y_size())?;
    let slice = view_slice(p, joint, k);
    let nu = latent_dims[k];
    let ny = slice.ny;
    let mut values = vec![0.0; slice.nx * nu];
    let mut p_y_x = vec![0.0; ny];
    let mut p_y_rest = vec![0.0; ny];
    for x in 0..slice.nx {
        let block = &slice.data[x * slice.rest_count * ny..(x + 1) * slice.rest_count * ny];
        let p_x: f64 = block.iter().sum();
        if p_x <= 0.0 {
            continue;
        }
        p_y_x.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..slice.rest_count {
            for y in 0..ny {
                p_y_x[y] += block[r * ny + y];
            }
        }
        p_y_x.iter_mut().for_each(|v| *v /= p_x);
        for u in 0..nu {
            let first = kl_slices(&p_y_x, q.side[k].row(u));
            let mut second = 0.0;
            for r in 0..slice.rest_count {
                let w: f64 = block[r * ny..(r + 1) * ny].iter().sum();
                if w <= 0.0 {
                    continue;
                }
                for y in 0..ny {
                    p_y_rest[y] = block[r * ny + y] / w;
                }
                let row = full_tuple_index(&latent_dims, k, u, r);
                second += (w / p_x) * kl_slices(&p_y_rest, q.main.row(row));
            }
            values[x * nu + u] = first + second / s;
        }
    }
    Ok(PsiTable {
        nx: slice.nx,
        nu,
        values,
    })
}

/// Single entry of [`psi_table`].
pub fn psi(
    p: &EncoderSet,
    q: &DecoderSet,
    joint: &JointPmf,
    k: usize,
    u_k: usize,
    x_k: usize,
    s: f64,
) -> Result<f64> {
    let table = psi_table(p, q, joint, k, s)?;
    if u_k >= table.nu || x_k >= table.nx {
        return Err(DibError::Usage(format!("symbol ({u_k}, {x_k}) out of range")));
    }
    Ok(table.get(u_k, x_k))
}

/// Normalizes `q(u) exp(-psi(u, x))` over `u` for every `x` in log space.
fn encoder_from_psi(prior: &DiscretePmf, psi: &PsiTable, k: usize) -> Result<ConditionalPmf> {
    let nu = psi.nu;
    let mut table = vec![0.0; psi.nx * nu];
    let mut logits = vec![0.0; nu];
    for x in 0..psi.nx {
        for (u, l) in logits.iter_mut().enumerate() {
            let q = prior.probs()[u];
            let e = psi.get(u, x);
            *l = if q > 0.0 && e.is_finite() { q.ln() - e } else { f64::NEG_INFINITY };
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(DibError::DegenerateRow { encoder: k, symbol: x });
        }
        let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        for (u, l) in logits.iter().enumerate() {
            table[x * nu + u] = (l - max).exp() / z;
        }
    }
    Ok(ConditionalPmf::new_unchecked(psi.nx, nu, table))
}

/// Outcome of an encoder sweep.
#[derive(Debug, Clone)]
pub struct PUpdate {
    pub encoders: EncoderSet,
    /// `(encoder, symbol)` pairs carrying zero mass in every row.
    pub pruned: Vec<(usize, usize)>,
}

/// One sweep of encoder updates `p(u_k|x_k) ∝ q(u_k) exp(-psi(u_k, x_k))`
/// against fixed decoders `q`. Encoders are refreshed in index order; the
/// exponent of encoder `k` sees the already-updated encoders `0..k`.
pub fn p_update(p: &EncoderSet, q: &DecoderSet, joint: &JointPmf, s: f64) -> Result<PUpdate> {
    check_s(s)?;
    let mut current = p.clone();
    for k in 0..p.num_encoders() {
        let psi = psi_table(&current, q, joint, k, s)?;
        current.encoders[k] = encoder_from_psi(&q.priors[k], &psi, k)?;
    }
    let mut pruned = Vec::new();
    for (k, enc) in current.encoders.iter().enumerate() {
        for u in 0..enc.cols() {
            if (0..enc.rows()).all(|x| enc.get(x, u) == 0.0) {
                pruned.push((k, u));
            }
        }
    }
    Ok(PUpdate {
        encoders: current,
        pruned,
    })
}

/// `I(X_k; U_k)` from the view marginal and the encoder.
fn encoder_information(p_x: &[f64], enc: &ConditionalPmf) -> f64 {
    let nu = enc.cols();
    let mut p_u = vec![0.0; nu];
    let mut cond = 0.0;
    for (x, &px) in p_x.iter().enumerate() {
        if px <= 0.0 {
            continue;
        }
        let row = enc.row(x);
        for (pu, &v) in p_u.iter_mut().zip(row) {
            *pu += px * v;
        }
        cond += px * entropy_of(row);
    }
    (entropy_of(&p_u) - cond).max(0.0)
}

/// `L_s(P) = -H(Y|U_K) - s sum_k [H(Y|U_k) + I(X_k;U_k)]`.
pub fn dib_cost(p: &EncoderSet, joint: &JointPmf, s: f64) -> Result<f64> {
    let m = induced_marginals(p, joint)?;
    let mut reg = 0.0;
    for k in 0..p.num_encoders() {
        reg += m.cond_entropy_side(k) + encoder_information(joint.p_x(k).probs(), p.encoder(k));
    }
    Ok(-m.cond_entropy_all() - s * reg)
}

/// `sum p ln q`, `-inf` when `q = 0` on the support of `p`.
fn cross_log(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::NEG_INFINITY;
            }
            acc += pi * qi.ln();
        }
    }
    acc
}

/// `L^VB_s(P, Q) = E[ln q(Y|U_K)] + s sum_k (E[ln q(Y|U_k)] - D(p(u_k|x_k) || q(u_k)))`.
pub fn variational_cost(p: &EncoderSet, q: &DecoderSet, joint: &JointPmf, s: f64) -> Result<f64> {
    let m = induced_marginals(p, joint)?;
    q.check_against(m.latent_dims(), joint.y_size())?;
    let main = cross_log(m.joint_uy(), q.main.table());
    let mut reg = 0.0;
    for k in 0..p.num_encoders() {
        let side = cross_log(m.p_uy(k), q.side[k].table());
        let p_x = joint.p_x(k);
        let enc = p.encoder(k);
        let mut div = 0.0;
        for (x, &px) in p_x.probs().iter().enumerate() {
            if px > 0.0 {
                div += px * kl_slices(enc.row(x), q.priors[k].probs());
            }
        }
        reg += side - div;
    }
    Ok(main + s * reg)
}

/// Relevance and sum-complexity of a set of encoders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelevanceComplexity {
    pub relevance: f64,
    pub sum_complexity: f64,
}

/// `Δ = I(Y;U_K)`, `R = I(Y;U_K) + sum_k [I(X_k;U_k) - I(Y;U_k)]`.
pub fn evaluate_pair(p: &EncoderSet, joint: &JointPmf) -> Result<RelevanceComplexity> {
    let m = induced_marginals(p, joint)?;
    let delta = m.relevance();
    let mut r = delta;
    for k in 0..p.num_encoders() {
        r += encoder_information(joint.p_x(k).probs(), p.encoder(k)) - m.side_relevance(k);
    }
    Ok(RelevanceComplexity {
        relevance: delta,
        sum_complexity: r.max(0.0),
    })
}

/// `sum_k I(X_k; U_k | Y)`.
pub fn conditional_complexity(p: &EncoderSet, joint: &JointPmf) -> Result<f64> {
    let m = induced_marginals(p, joint)?;
    let mut total = 0.0;
    for k in 0..p.num_encoders() {
        total += encoder_information(joint.p_x(k).probs(), p.encoder(k)) - m.side_relevance(k);
    }
    Ok(total.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaConfig {
    pub s: f64,
    /// `|U_k|` per encoder; defaults to `|X_k|`.
    pub cardinalities: Option<Vec<usize>>,
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Log-normal spread of the near-uniform starting encoders.
    pub init_noise: f64,
}

impl Default for BaConfig {
    fn default() -> Self {
        BaConfig {
            s: 1.0,
            cardinalities: None,
            tol: 1e-8,
            max_iter: 5000,
            restarts: 5,
            seed: 0,
            init_noise: 0.1,
        }
    }
}

impl BaConfig {
    pub fn with_s(s: f64) -> Self {
        BaConfig { s, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        check_s(self.s)?;
        if !(self.tol > 0.0) {
            return Err(DibError::Usage("tol must be positive".into()));
        }
        if self.max_iter == 0 || self.restarts == 0 {
            return Err(DibError::Usage("max_iter and restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// One iteration of the alternating scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iteration: usize,
    /// `L_s(P_t) = L^VB_s(P_t, Q_t)`.
    pub cost: f64,
    /// `L^VB_s(P_t, Q_{t-1})`, between the two half-steps; equals `cost` at
    /// iteration 0.
    pub half_step: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub records: Vec<IterRecord>,
    pub converged: bool,
    pub iterations: usize,
    pub restart: usize,
    /// Final cost of every restart, in restart order.
    pub restart_costs: Vec<f64>,
    pub notes: Vec<String>,
}

impl SolveTrace {
    /// Largest decrease along the interleaved half-step sequence
    /// `cost_0 <= half_1 <= cost_1 <= ...` (zero when monotone).
    pub fn worst_descent(&self) -> f64 {
        let mut seq = Vec::with_capacity(self.records.len() * 2);
        for (i, r) in self.records.iter().enumerate() {
            if i > 0 {
                seq.push(r.half_step);
            }
            seq.push(r.cost);
        }
        seq.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct BaSolution {
    pub encoders: EncoderSet,
    pub decoders: DecoderSet,
    pub trace: SolveTrace,
    pub cost: f64,
    pub pair: RelevanceComplexity,
}

/// Uniform rows scaled by iid log-normal factors, renormalized.
pub fn perturbed_uniform(joint: &JointPmf, dims: &[usize], noise: f64, rng: &mut SeededRng) -> EncoderSet {
    let encoders = dims
        .iter()
        .enumerate()
        .map(|(k, &nu)| {
            let nx = joint.view_size(k);
            let mut table = Vec::with_capacity(nx * nu);
            for _ in 0..nx {
                let row: Vec<f64> = (0..nu).map(|_| (noise * rng.normal()).exp()).collect();
                let z: f64 = row.iter().sum();
                table.extend(row.into_iter().map(|v| v / z));
            }
            ConditionalPmf::new_unchecked(nx, nu, table)
        })
        .collect();
    EncoderSet { encoders }
}

fn run_from(joint: &JointPmf, start: EncoderSet, config: &BaConfig) -> Result<(EncoderSet, DecoderSet, SolveTrace)> {
    let s = config.s;
    let mut p = start;
    let mut q = q_update(&p, joint)?;
    let mut cost = variational_cost(&p, &q, joint, s)?;
    let mut trace = SolveTrace {
        records: vec![IterRecord {
            iteration: 0,
            cost,
            half_step: cost,
        }],
        ..Default::default()
    };
    let mut reported_pruned = Vec::new();
    for t in 1..=config.max_iter {
        let upd = p_update(&p, &q, joint, s)?;
        for pr in &upd.pruned {
            if !reported_pruned.contains(pr) {
                trace
                    .notes
                    .push(format!("iteration {t}: latent symbol {} of encoder {} pruned", pr.1, pr.0));
                reported_pruned.push(*pr);
            }
        }
        let half = variational_cost(&upd.encoders, &q, joint, s)?;
        p = upd.encoders;
        q = q_update(&p, joint)?;
        let next = variational_cost(&p, &q, joint, s)?;
        trace.records.push(IterRecord {
            iteration: t,
            cost: next,
            half_step: half,
        });
        trace.iterations = t;
        let change = (next - cost).abs();
        cost = next;
        if change < config.tol {
            trace.converged = true;
            break;
        }
    }
    Ok((p, q, trace))
}

/// Alternating maximization from `restarts` perturbed-uniform starts; the
/// run with the largest final `L_s` is returned.
pub fn ba_solve(joint: &JointPmf, config: &BaConfig) -> Result<BaSolution> {
    config.validate()?;
    let markov = joint.validate_markov();
    if !markov.holds {
        return Err(DibError::Usage(format!(
            "joint pmf violates conditional independence of the views given Y (deviation {:.3e})",
            markov.max_deviation
        )));
    }
    let dims = match &config.cardinalities {
        Some(d) if d.len() != joint.num_views() || d.contains(&0) => {
            return Err(DibError::Usage(format!(
                "cardinalities {d:?} do not fit {} views",
                joint.num_views()
            )))
        }
        Some(d) => d.clone(),
        None => (0..joint.num_views()).map(|k| joint.view_size(k)).collect(),
    };
    let mut best: Option<(EncoderSet, DecoderSet, SolveTrace, f64)> = None;
    let mut restart_costs = Vec::with_capacity(config.restarts);
    for r in 0..config.restarts {
        let mut rng = SeededRng::with_stream(config.seed, derive_stream(1, r as u64));
        let start = perturbed_uniform(joint, &dims, config.init_noise, &mut rng);
        let (p, q, mut trace) = run_from(joint, start, config)?;
        let cost = trace.records.last().map_or(f64::NEG_INFINITY, |rec| rec.cost);
        restart_costs.push(cost);
        trace.restart = r;
        if best.as_ref().map_or(true, |b| cost > b.3) {
            best = Some((p, q, trace, cost));
        }
    }
    let (encoders, decoders, mut trace, cost) = best.expect("at least one restart");
    trace.restart_costs = restart_costs;
    let pair = evaluate_pair(&encoders, joint)?;
    Ok(BaSolution {
        encoders,
        decoders,
        trace,
        cost,
        pair,
    })
}

/// Best grid point found by [`brute_force_oracle`].
#[derive(Debug, Clone)]
pub struct GridOptimum {
    pub cost: f64,
    pub encoders: EncoderSet,
    pub configurations: u128,
}

/// Upper limit on the enumerated grid.
pub const MAX_GRID_CONFIGURATIONS: u128 = 10_000_000;

fn simplex_grid(dim: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(dim: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if dim == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for v in 0..=left {
            prefix.push(v);
            rec(dim - 1, left - v, prefix, out);
            prefix.pop();
        }
    }
    let mut raw = Vec::new();
    rec(dim, steps, &mut Vec::new(), &mut raw);
    raw.into_iter()
        .map(|c| c.into_iter().map(|v| v as f64 / steps as f64).collect())
        .collect()
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Exhaustive search of `L_s` over encoders whose rows lie on a regular grid
/// of the probability simplex with spacing `grid_step`. Test oracle.
pub fn brute_force_oracle(
    joint: &JointPmf,
    s: f64,
    grid_step: f64,
    cardinalities: Option<&[usize]>,
) -> Result<GridOptimum> {
    check_s(s)?;
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(DibError::Usage(format!("grid step {grid_step} outside (0, 1]")));
    }
    let steps = (1.0 / grid_step).round() as usize;
    let dims: Vec<usize> = match cardinalities {
        Some(d) => d.to_vec(),
        None => (0..joint.num_views()).map(|k| joint.view_size(k)).collect(),
    };
    let mut total: u128 = 1;
    for (k, &nu) in dims.iter().enumerate() {
        let per_row = binomial((steps + nu - 1) as u128, (nu - 1) as u128);
        for _ in 0..joint.view_size(k) {
            total = total.saturating_mul(per_row);
            if total > MAX_GRID_CONFIGURATIONS {
                return Err(DibError::SearchSpaceTooLarge(total));
            }
        }
    }
    let grids: Vec<Vec<Vec<f64>>> = dims.iter().map(|&nu| simplex_grid(nu, steps)).collect();
    // one odometer digit per encoder row
    let mut digit_grid = Vec::new();
    for k in 0..dims.len() {
        for _ in 0..joint.view_size(k) {
            digit_grid.push(k);
        }
    }
    let digit_sizes: Vec<usize> = digit_grid.iter().map(|&k| grids[k].len()).collect();
    let mut best: Option<(f64, EncoderSet)> = None;
    let mut tables: Vec<Vec<f64>> = dims
        .iter()
        .enumerate()
        .map(|(k, &nu)| vec![0.0; joint.view_size(k) * nu])
        .collect();
    let mut err = None;
    for_each_index(&digit_sizes, |digits, _| {
        if err.is_some() {
            return;
        }
        let mut d = 0;
        for (k, &nu) in dims.iter().enumerate() {
            for x in 0..joint.view_size(k) {
                tables[k][x * nu..(x + 1) * nu].copy_from_slice(&grids[k][digits[d]]);
                d += 1;
            }
        }
        let enc = EncoderSet {
            encoders: dims
                .iter()
                .enumerate()
                .map(|(k, &nu)| ConditionalPmf::new_unchecked(joint.view_size(k), nu, tables[k].clone()))
                .collect(),
        };
        match dib_cost(&enc, joint, s) {
            Ok(c) => {
                if best.as_ref().map_or(true, |b| c > b.0) {
                    best = Some((c, enc));
                }
            }
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let (cost, encoders) = best.expect("grid is non-empty");
    Ok(GridOptimum {
        cost,
        encoders,
        configurations: total,
    })
}

/// Entropy of `p(y)` in nats.
pub fn target_entropy(joint: &JointPmf) -> f64 {
    let p = joint.p_y();
    -p.probs().iter().map(|&v| xlogx(v)).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{toy_discrete_joint, ToyJointSpec};
    use std::f64::consts::LN_2;

    fn copy2() -> JointPmf {
        toy_discrete_joint(&ToyJointSpec::Copy { views: 2, alphabet: 2 }, 0).unwrap()
    }

    fn random_joint(seed: u64) -> JointPmf {
        toy_discrete_joint(&ToyJointSpec::Random { y: 2, views: vec![2, 2] }, seed).unwrap()
    }

    #[test]
    fn constant_encoders_carry_nothing() {
        let j = random_joint(3);
        let rows = [DiscretePmf::new(vec![0.3, 0.7]).unwrap(), DiscretePmf::uniform(2)];
        let p = EncoderSet::constant(&j, &rows);
        let m = induced_marginals(&p, &j).unwrap();
        for k in 0..2 {
            let d = m.y_given_u(k);
            for u in 0..2 {
                for y in 0..2 {
                    assert!((d.get(u, y) - m.p_y()[y]).abs() < 1e-12);
                }
            }
        }
        let q = q_update(&p, &j).unwrap();
        assert!((q.priors[0].probs()[0] - 0.3).abs() < 1e-12);
        let h = target_entropy(&j);
        for s in [0.1, 1.0, 4.0] {
            assert!((dib_cost(&p, &j, s).unwrap() + h + s * 2.0 * h).abs() < 1e-10);
        }
        let pair = evaluate_pair(&p, &j).unwrap();
        assert!(pair.relevance.abs() < 1e-12 && pair.sum_complexity.abs() < 1e-12);
    }

    #[test]
    fn identity_encoders_on_copy() {
        let j = copy2();
        let p = EncoderSet::identity(&j);
        let m = induced_marginals(&p, &j).unwrap();
        assert_eq!(m.y_given_u(0), ConditionalPmf::identity(2));
        let q = q_update(&p, &j).unwrap();
        assert_eq!(q.main.row(0), &[1.0, 0.0]);
        assert_eq!(q.main.row(3), &[0.0, 1.0]);
        assert!((dib_cost(&p, &j, 1.0).unwrap() + 2.0 * LN_2).abs() < 1e-12);
        let pair = evaluate_pair(&p, &j).unwrap();
        assert!((pair.relevance - LN_2).abs() < 1e-12);
        assert!((pair.sum_complexity - LN_2).abs() < 1e-12);
    }

    #[test]
    fn single_view_psi_collapses() {
        let j = toy_discrete_joint(&ToyJointSpec::Random { y: 3, views: vec![4] }, 1).unwrap();
        let mut rng = SeededRng::new(5);
        let p = perturbed_uniform(&j, &[3], 1.0, &mut rng);
        let q = q_update(&p, &j).unwrap();
        let s = 0.7;
        let table = psi_table(&p, &q, &j, 0, s).unwrap();
        let p_y_x = j.x_given_y(0);
        let p_x = j.p_x(0);
        for x in 0..4 {
            let post: Vec<f64> = (0..3).map(|y| j.p_y().probs()[y] * p_y_x.get(y, x) / p_x.probs()[x]).collect();
            for u in 0..3 {
                let expected = (1.0 + 1.0 / s) * kl_slices(&post, q.side[0].row(u));
                assert!((table.get(u, x) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_psi_returns_prior() {
        let j = toy_discrete_joint(&ToyJointSpec::Independent { y: 2, views: vec![3, 2] }, 2).unwrap();
        let mut rng = SeededRng::new(1);
        let p = perturbed_uniform(&j, &[3, 2], 0.5, &mut rng);
        let q = q_update(&p, &j).unwrap();
        for k in 0..2 {
            let t = psi_table(&p, &q, &j, k, 0.3).unwrap();
            assert!(t.values.iter().all(|v| v.abs() < 1e-12));
        }
        let upd = p_update(&p, &q, &j, 0.3).unwrap();
        for k in 0..2 {
            let enc = upd.encoders.encoder(k);
            for x in 0..enc.rows() {
                for (a, b) in enc.row(x).iter().zip(q.priors[k].probs()) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn infinite_psi_excludes_symbol() {
        let j = copy2();
        let p = EncoderSet::identity(&j);
        let mut q = q_update(&p, &j).unwrap();
        // latent 0 of encoder 0 now claims Y = 1 surely, which contradicts x = 0
        q.side[0] = ConditionalPmf::from_rows(vec![vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let t = psi_table(&p, &q, &j, 0, 1.0).unwrap();
        assert_eq!(t.get(0, 0), f64::INFINITY);
        let upd = p_update(&p, &q, &j, 1.0).unwrap();
        assert_eq!(upd.encoders.encoder(0).get(0, 0), 0.0);
        assert!((upd.encoders.encoder(0).get(0, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_infinite_row_is_degenerate() {
        let j = copy2();
        let p = EncoderSet::identity(&j);
        let mut q = q_update(&p, &j).unwrap();
        q.side[0] = ConditionalPmf::from_rows(vec![vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            p_update(&p, &q, &j, 1.0),
            Err(DibError::DegenerateRow { encoder: 0, symbol: 0 })
        ));
    }

    #[test]
    fn nonpositive_s_rejected() {
        let j = copy2();
        let p = EncoderSet::identity(&j);
        let q = q_update(&p, &j).unwrap();
        assert!(matches!(psi(&p, &q, &j, 0, 0, 0, 0.0), Err(DibError::Usage(_))));
        assert!(matches!(p_update(&p, &q, &j, -1.0), Err(DibError::Usage(_))));
        assert!(matches!(ba_solve(&j, &BaConfig::with_s(0.0)), Err(DibError::Usage(_))));
    }

    #[test]
    fn mismatched_priors_lower_the_bound() {
        let j = random_joint(4);
        let mut rng = SeededRng::new(2);
        let p = perturbed_uniform(&j, &[2, 2], 1.0, &mut rng);
        let mut q = q_update(&p, &j).unwrap();
        let exact = variational_cost(&p, &q, &j, 1.0).unwrap();
        assert!((exact - dib_cost(&p, &j, 1.0).unwrap()).abs() < 1e-10);
        let flipped: Vec<f64> = q.priors[1].probs().iter().rev().copied().collect();
        q.priors[1] = DiscretePmf::new(flipped).unwrap();
        assert!(variational_cost(&p, &q, &j, 1.0).unwrap() < exact - 1e-6);
    }

    #[test]
    fn independent_model_solves_to_zero_relevance() {
        let j = toy_discrete_joint(&ToyJointSpec::Independent { y: 2, views: vec![2, 2] }, 8).unwrap();
        let sol = ba_solve(&j, &BaConfig::with_s(1.0)).unwrap();
        assert!(sol.trace.converged);
        assert!(sol.trace.iterations <= 3, "{}", sol.trace.iterations);
        assert!(sol.pair.relevance < 1e-8);
    }

    #[test]
    fn non_markov_joint_rejected() {
        let j = JointPmf::new(vec![2, 2, 2], vec![0.25, 0.0, 0.0, 0.25, 0.0, 0.25, 0.25, 0.0]).unwrap();
        assert!(!j.validate_markov().holds);
        assert!(matches!(ba_solve(&j, &BaConfig::with_s(1.0)), Err(DibError::Usage(_))));
    }

    #[test]
    fn grid_search_limits() {
        let j = toy_discrete_joint(&ToyJointSpec::Random { y: 2, views: vec![3, 3] }, 0).unwrap();
        assert!(matches!(
            brute_force_oracle(&j, 1.0, 0.01, None),
            Err(DibError::SearchSpaceTooLarge(_))
        ));
        let indep = toy_discrete_joint(&ToyJointSpec::Independent { y: 2, views: vec![2, 2] }, 1).unwrap();
        let s = 0.5;
        let best = brute_force_oracle(&indep, s, 0.25, None).unwrap();
        let h = target_entropy(&indep);
        assert!((best.cost + (1.0 + 2.0 * s) * h).abs() < 1e-10);
    }

    #[test]
    fn grid_argmax_on_single_copy_is_nearly_deterministic() {
        let j = toy_discrete_joint(&ToyJointSpec::Copy { views: 1, alphabet: 2 }, 0).unwrap();
        let best = brute_force_oracle(&j, 0.01, 0.05, None).unwrap();
        let enc = best.encoders.encoder(0);
        for x in 0..2 {
            assert!(enc.row(x).iter().cloned().fold(0.0, f64::max) > 0.9);
        }
        assert!(enc.get(0, 0) > 0.5 && enc.get(1, 1) > 0.5 || enc.get(0, 1) > 0.5 && enc.get(1, 0) > 0.5);
    }

    #[test]
    fn tuple_index_reinserts_symbol() {
        // dims (2, 3, 4), k = 1: rest tuple (u0, u2) flat = u0 * 4 + u2
        assert_eq!(full_tuple_index(&[2, 3, 4], 1, 2, 5), 12 + 2 * 4 + 1);
        assert_eq!(full_tuple_index(&[2, 3], 0, 1, 2), 5);
    }
}

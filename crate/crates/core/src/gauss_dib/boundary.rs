//! Outer bounds for the vector Gaussian model: the subset inequalities, the
//! optimal sum-complexity curve and the centralized bound.
//!
//! Everything runs in whitened coordinates `W_k = Sigma_k^{1/2} Omega_k
//! Sigma_k^{1/2}`, where the constraint `0 <= Omega_k <= Sigma_k^{-1}` becomes
//! `0 <= W_k <= I`. With `M_k = Sigma_k^{-1/2} H_k Sigma_y^{1/2}` the two
//! extreme subset bounds are
//!
//! * `a(W) = c ln|I + sum_k M_k' W_k M_k|` (empty subset), and
//! * `R + b(W)` with `b(W) = c sum_k ln|I - W_k|` (full subset),
//!
//! and the curve is `Delta*(R) = max_W min{a(W), R + b(W)}`. Both pieces are
//! concave, so the curve is obtained from the concave scalarization
//! `mu a + (1 - mu) b`, whose maximizer over one block `W_k` with the
//! others fixed is available in closed form: with
//! `C = M_k (I + sum_{j != k} M_j' W_j M_j)^{-1} M_k'` diagonalized as
//! `V diag(g) V'`, the optimum is `V diag(max(0, mu - (1 - mu)/g_i)) V'`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DibError, Result};
use crate::info::linalg::{inverse_spd, logdet_psd, map_eigenvalues, serde_rows, sqrt_psd, symmetrize};
use crate::info::{FieldFactor, LinearGaussianModel};
use crate::tradeoff::TradeoffPoint;

/// Slack allowed on `0 <= Omega_k <= Sigma_k^{-1}`.
pub const OMEGA_TOL: f64 = 1e-9;

/// Matrices `Omega_k` parameterizing the outer bound, one per view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaSet {
    #[serde(with = "serde_rows::vec")]
    omegas: Vec<DMatrix<f64>>,
}

impl OmegaSet {
    pub fn new(model: &LinearGaussianModel, omegas: Vec<DMatrix<f64>>) -> Result<Self> {
        let w = Whitening::new(model)?;
        if omegas.len() != model.num_views() {
            return Err(DibError::Dimension(format!(
                "{} matrices for {} views",
                omegas.len(),
                model.num_views()
            )));
        }
        for (k, om) in omegas.iter().enumerate() {
            let n = model.view_dims()[k];
            if om.shape() != (n, n) {
                return Err(DibError::Dimension(format!("omega {k} is {:?}, expected {n}x{n}", om.shape())));
            }
            let white = w.whiten(k, om);
            let eig = crate::info::linalg::eigenvalues(&white);
            if eig.iter().any(|&e| e < -OMEGA_TOL || e > 1.0 + OMEGA_TOL) {
                return Err(DibError::InvalidDistribution(format!(
                    "omega {k} violates 0 <= omega <= inverse noise covariance"
                )));
            }
        }
        Ok(OmegaSet {
            omegas: omegas.iter().map(symmetrize).collect(),
        })
    }

    pub fn zeros(model: &LinearGaussianModel) -> Self {
        OmegaSet {
            omegas: model.view_dims().iter().map(|&n| DMatrix::zeros(n, n)).collect(),
        }
    }

    pub fn omegas(&self) -> &[DMatrix<f64>] {
        &self.omegas
    }

    pub fn omega(&self, k: usize) -> &DMatrix<f64> {
        &self.omegas[k]
    }
}

/// Per-view whitening data.
#[derive(Debug, Clone)]
pub(crate) struct Whitening {
    root: Vec<DMatrix<f64>>,
    inv_root: Vec<DMatrix<f64>>,
    /// `M_k`, `n_k x n_y`.
    m: Vec<DMatrix<f64>>,
    ny: usize,
}

impl Whitening {
    pub(crate) fn new(model: &LinearGaussianModel) -> Result<Self> {
        let y_root = sqrt_psd(model.sigma_y());
        let mut root = Vec::new();
        let mut inv_root = Vec::new();
        let mut m = Vec::new();
        for ch in model.channels() {
            let r = sqrt_psd(&ch.sigma);
            let ir = inverse_spd(&r, "noise covariance root")?;
            m.push(&ir * &ch.h * &y_root);
            root.push(r);
            inv_root.push(ir);
        }
        Ok(Whitening {
            root,
            inv_root,
            m,
            ny: model.n_y(),
        })
    }

    fn whiten(&self, k: usize, omega: &DMatrix<f64>) -> DMatrix<f64> {
        symmetrize(&(&self.root[k] * omega * &self.root[k]))
    }

    fn unwhiten(&self, k: usize, w: &DMatrix<f64>) -> DMatrix<f64> {
        symmetrize(&(&self.inv_root[k] * w * &self.inv_root[k]))
    }

    fn gain(&self, ws: &[DMatrix<f64>], skip: Option<usize>) -> DMatrix<f64> {
        let mut g = DMatrix::identity(self.ny, self.ny);
        for (k, w) in ws.iter().enumerate() {
            if Some(k) != skip {
                g += self.m[k].transpose() * w * &self.m[k];
            }
        }
        g
    }

    /// `ln|I + sum_k M_k' M_k|`, the value of `a` at `W = I`.
    fn limit(&self) -> f64 {
        let ws: Vec<DMatrix<f64>> = self.m.iter().map(|m| DMatrix::identity(m.nrows(), m.nrows())).collect();
        logdet_psd(&self.gain(&ws, None))
    }

    /// `(a, b)` without the field factor.
    fn pieces(&self, ws: &[DMatrix<f64>]) -> (f64, f64) {
        let a = logdet_psd(&self.gain(ws, None));
        let b = ws
            .iter()
            .map(|w| logdet_psd(&(DMatrix::identity(w.nrows(), w.nrows()) - w)))
            .sum();
        (a, b)
    }
}

/// `sum_{k in S} (R_k + c ln|I - Sigma_k^{1/2} Omega_k Sigma_k^{1/2}|)
///   + c ln|I + sum_{k not in S} Sigma_y^{1/2} H_k' Omega_k H_k Sigma_y^{1/2}|`.
pub fn region_bound(
    model: &LinearGaussianModel,
    omega: &OmegaSet,
    rates: &[f64],
    subset: &[usize],
    field: FieldFactor,
) -> Result<f64> {
    let k_views = model.num_views();
    if omega.omegas.len() != k_views || rates.len() != k_views {
        return Err(DibError::Dimension(format!(
            "{} omegas and {} rates for {k_views} views",
            omega.omegas.len(),
            rates.len()
        )));
    }
    if let Some(&bad) = subset.iter().find(|&&k| k >= k_views) {
        return Err(DibError::Dimension(format!("subset index {bad} out of range")));
    }
    let w = Whitening::new(model)?;
    let c = field.c();
    let mut total = 0.0;
    let mut outside = Vec::new();
    for k in 0..k_views {
        let white = w.whiten(k, &omega.omegas[k]);
        if subset.contains(&k) {
            let n = white.nrows();
            total += rates[k] + c * logdet_psd(&(DMatrix::identity(n, n) - white));
            outside.push(DMatrix::zeros(n, n));
        } else {
            outside.push(white);
        }
    }
    Ok(total + c * logdet_psd(&w.gain(&outside, None)))
}

const INNER_TOL: f64 = 1e-13;
const INNER_MAX_SWEEPS: usize = 20_000;

#[derive(Debug, Clone)]
struct Inner {
    ws: Vec<DMatrix<f64>>,
    /// `a` and `b` without the field factor.
    a: f64,
    b: f64,
    sweeps: usize,
    converged: bool,
}

/// Maximizes `mu a + (1 - mu) b` over whitened blocks by exact block
/// coordinate ascent, starting from `warm` when given.
fn scalarized(w: &Whitening, mu: f64, warm: Option<&[DMatrix<f64>]>) -> Inner {
    let mut ws: Vec<DMatrix<f64>> = match warm {
        Some(ws) => ws.to_vec(),
        None => w.m.iter().map(|m| DMatrix::zeros(m.nrows(), m.nrows())).collect(),
    };
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < INNER_MAX_SWEEPS {
        sweeps += 1;
        let mut change: f64 = 0.0;
        for k in 0..ws.len() {
            let rest = w.gain(&ws, Some(k));
            let rest_inv = inverse_spd(&rest, "partial gain").expect("gain is >= I");
            let c = symmetrize(&(&w.m[k] * rest_inv * w.m[k].transpose()));
            let next = map_eigenvalues(&c, |g| if g > 0.0 { (mu - (1.0 - mu) / g).max(0.0) } else { 0.0 });
            change = change.max((&next - &ws[k]).abs().max());
            ws[k] = next;
        }
        if change < INNER_TOL || ws.len() == 1 {
            converged = true;
            break;
        }
    }
    let (a, b) = w.pieces(&ws);
    Inner {
        ws,
        a,
        b,
        sweeps,
        converged,
    }
}

/// A point of `Delta*(R)` with its certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub point: TradeoffPoint,
    /// Weight on the relevance piece, `1 / (1 + s)`.
    pub mu: f64,
    /// Dual value minus attained value; zero on exactly tangent points.
    pub gap: f64,
    pub omega: OmegaSet,
}

fn mu_from_s(s: f64) -> Result<f64> {
    if !(s > 0.0) || s.is_nan() {
        return Err(DibError::Usage(format!("tradeoff multiplier s must be positive, got {s}")));
    }
    Ok(1.0 / (1.0 + s))
}

fn boundary_point(
    w: &Whitening,
    inner: &Inner,
    s: f64,
    mu: f64,
    relevance: f64,
    rate: f64,
    gap: f64,
    iterations: usize,
) -> BoundaryPoint {
    BoundaryPoint {
        point: TradeoffPoint {
            s,
            relevance,
            sum_complexity: rate,
            iterations,
            converged: inner.converged && gap < 1e-8,
        },
        mu,
        gap,
        omega: OmegaSet {
            omegas: inner.ws.iter().enumerate().map(|(k, x)| w.unwhiten(k, x)).collect(),
        },
    }
}

/// The point of `Delta*(R)` where the slope is `s / (1 + s)`.
pub fn boundary_at_s(model: &LinearGaussianModel, s: f64, field: FieldFactor) -> Result<BoundaryPoint> {
    let mu = mu_from_s(s)?;
    let w = Whitening::new(model)?;
    let inner = scalarized(&w, mu, None);
    let c = field.c();
    let (a, b) = (c * inner.a, c * inner.b);
    Ok(boundary_point(&w, &inner, s, mu, a, (a - b).max(0.0), 0.0, inner.sweeps))
}

/// `Delta*(rate)`, by bisection on the slope parameter. The attained value
/// `min{a, rate + b}` at the best bracketing multiplier is returned; `gap`
/// bounds its distance to the optimum.
pub fn boundary_at_rate(model: &LinearGaussianModel, rate: f64, field: FieldFactor) -> Result<BoundaryPoint> {
    if !(rate >= 0.0) {
        return Err(DibError::Usage(format!("sum-complexity must be non-negative, got {rate}")));
    }
    let w = Whitening::new(model)?;
    let c = field.c();
    let zero = scalarized(&w, 0.0, None);
    if rate == 0.0 {
        return Ok(boundary_point(&w, &zero, f64::INFINITY, 0.0, 0.0, 0.0, 0.0, 0));
    }
    // rate(mu) = c (a - b) grows with mu
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut lo_inner = zero;
    let mut hi_inner: Option<Inner> = None;
    let mut iterations = 0;
    let mut warm: Option<Vec<DMatrix<f64>>> = None;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let inner = scalarized(&w, mid, warm.as_deref());
        iterations += inner.sweeps;
        warm = Some(inner.ws.clone());
        if c * (inner.a - inner.b) < rate {
            lo = mid;
            lo_inner = inner;
        } else {
            hi = mid;
            hi_inner = Some(inner);
        }
    }
    let attained = |inner: &Inner| (c * inner.a).min(rate + c * inner.b);
    let dual = |mu: f64, inner: &Inner| (1.0 - mu) * rate + mu * c * inner.a + (1.0 - mu) * c * inner.b;
    let mut best = (attained(&lo_inner), lo, &lo_inner);
    if let Some(h) = &hi_inner {
        if attained(h) > best.0 {
            best = (attained(h), hi, h);
        }
    }
    let upper = match &hi_inner {
        Some(h) => dual(lo, &lo_inner).min(dual(hi, h)),
        None => dual(lo, &lo_inner).min(c * w.limit()),
    };
    let (value, mu, inner) = best;
    let gap = (upper - value).max(0.0);
    let s = if mu > 0.0 { (1.0 - mu) / mu } else { f64::INFINITY };
    Ok(boundary_point(&w, inner, s, mu, value, rate, gap, iterations))
}

/// `Delta*` at each multiplier of `s_grid`.
pub fn sum_boundary(model: &LinearGaussianModel, s_grid: &[f64], field: FieldFactor) -> Result<Vec<TradeoffPoint>> {
    s_grid.iter().map(|&s| Ok(boundary_at_s(model, s, field)?.point)).collect()
}

/// `Delta*` at each sum-complexity of `rates`.
pub fn sum_boundary_at_rates(
    model: &LinearGaussianModel,
    rates: &[f64],
    field: FieldFactor,
) -> Result<Vec<TradeoffPoint>> {
    rates.iter().map(|&r| Ok(boundary_at_rate(model, r, field)?.point)).collect()
}

/// Centralized bound: the single-view curve of the stacked observation.
pub fn cib_bound(model: &LinearGaussianModel, rate: f64, field: FieldFactor) -> Result<f64> {
    Ok(boundary_at_rate(&model.stacked(), rate, field)?.point.relevance)
}

pub fn cib_curve(model: &LinearGaussianModel, rates: &[f64], field: FieldFactor) -> Result<Vec<TradeoffPoint>> {
    sum_boundary_at_rates(&model.stacked(), rates, field)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_model() -> LinearGaussianModel {
        LinearGaussianModel::scalar(&[1.0]).unwrap()
    }

    /// `-1/2 ln(1 - rho^2 (1 - e^{-2R}))` with `rho^2 = 1/2`.
    fn scalar_curve(r: f64) -> f64 {
        -0.5 * (1.0 - 0.5 * (1.0 - (-2.0 * r).exp())).ln()
    }

    #[test]
    fn region_bound_examples() {
        let m = LinearGaussianModel::scalar(&[1.0, 0.5]).unwrap();
        let zero = OmegaSet::zeros(&m);
        let rates = [0.3, 0.9];
        let f = FieldFactor::Real;
        assert!((region_bound(&m, &zero, &rates, &[0, 1], f).unwrap() - 1.2).abs() < 1e-15);
        assert_eq!(region_bound(&m, &zero, &rates, &[], f).unwrap(), 0.0);

        let s = scalar_model();
        let om = OmegaSet::new(&s, vec![DMatrix::from_element(1, 1, 0.6)]).unwrap();
        let anchor = 0.5 * (8.0f64 / 5.0).ln();
        let ln2 = std::f64::consts::LN_2;
        assert!((region_bound(&s, &om, &[ln2], &[0], f).unwrap() - anchor).abs() < 1e-12);
        assert!((region_bound(&s, &om, &[ln2], &[], f).unwrap() - anchor).abs() < 1e-12);
        assert!((anchor - 0.2350018).abs() < 1e-7);
    }

    #[test]
    fn boundary_first_branch_singular() {
        let s = scalar_model();
        let om = OmegaSet::new(&s, vec![DMatrix::from_element(1, 1, 1.0)]).unwrap();
        assert_eq!(region_bound(&s, &om, &[1.0], &[0], FieldFactor::Real).unwrap(), f64::NEG_INFINITY);
        assert!(OmegaSet::new(&s, vec![DMatrix::from_element(1, 1, 1.1)]).is_err());
        assert!(OmegaSet::new(&s, vec![DMatrix::from_element(1, 1, -0.1)]).is_err());
    }

    #[test]
    fn scalar_closed_form_through_both_parameterizations() {
        let m = scalar_model();
        let anchor = boundary_at_rate(&m, std::f64::consts::LN_2, FieldFactor::Real).unwrap();
        assert!((anchor.point.relevance - 0.5 * (1.6f64).ln()).abs() < 1e-9);
        assert!((anchor.omega.omega(0)[(0, 0)] - 0.6).abs() < 1e-6);
        for s in [0.05, 0.2, 0.5, 0.9] {
            let p = boundary_at_s(&m, s, FieldFactor::Real).unwrap().point;
            assert!((p.relevance - scalar_curve(p.sum_complexity)).abs() < 1e-12, "{s}");
        }
        for r in [0.01, 0.1, 0.5, 1.0, 2.0, 4.0] {
            let p = boundary_at_rate(&m, r, FieldFactor::Real).unwrap();
            assert!((p.point.relevance - scalar_curve(r)).abs() < 1e-9, "{r}: {}", p.point.relevance);
            assert!(p.point.converged);
        }
    }

    #[test]
    fn zero_and_infinite_rate() {
        let m = LinearGaussianModel::scalar(&[1.0, 1.0]).unwrap();
        let p = boundary_at_rate(&m, 0.0, FieldFactor::Real).unwrap();
        assert_eq!(p.point.relevance, 0.0);
        let far = boundary_at_rate(&m, 30.0, FieldFactor::Real).unwrap();
        assert!((far.point.relevance - 0.5 * 3f64.ln()).abs() < 1e-6, "{}", far.point.relevance);
        assert!((cib_bound(&m, 30.0, FieldFactor::Real).unwrap() - 0.5 * 3f64.ln()).abs() < 1e-6);
        assert!((m.relevance_limit(FieldFactor::Real) - 0.5 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_view_cib_is_the_boundary() {
        let m = crate::datagen::random_model(2, &[3], 5).unwrap();
        for r in [0.2, 1.0, 3.0] {
            let a = boundary_at_rate(&m, r, FieldFactor::Real).unwrap().point.relevance;
            let b = cib_bound(&m, r, FieldFactor::Real).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn field_factor_doubles_everything() {
        let m = crate::datagen::random_model(1, &[2, 2], 9).unwrap();
        for s in [0.1, 1.0] {
            let real = boundary_at_s(&m, s, FieldFactor::Real).unwrap().point;
            let cplx = boundary_at_s(&m, s, FieldFactor::Complex).unwrap().point;
            assert!((2.0 * real.relevance - cplx.relevance).abs() < 1e-12);
            assert!((2.0 * real.sum_complexity - cplx.sum_complexity).abs() < 1e-12);
        }
        let om = boundary_at_s(&m, 0.5, FieldFactor::Real).unwrap().omega;
        for subset in [vec![], vec![0], vec![1], vec![0, 1]] {
            let r = region_bound(&m, &om, &[0.4, 0.2], &subset, FieldFactor::Real).unwrap();
            let c = region_bound(&m, &om, &[0.8, 0.4], &subset, FieldFactor::Complex).unwrap();
            assert!((2.0 * r - c).abs() < 1e-12);
        }
    }

    #[test]
    fn tangent_points_balance_the_two_branches() {
        let m = crate::datagen::random_model(1, &[3, 3], 2).unwrap();
        for s in [0.05, 0.3, 1.0] {
            let bp = boundary_at_s(&m, s, FieldFactor::Real).unwrap();
            let full = region_bound(&m, &bp.omega, &[bp.point.sum_complexity, 0.0], &[0, 1], FieldFactor::Real).unwrap();
            let empty = region_bound(&m, &bp.omega, &[0.0, 0.0], &[], FieldFactor::Real).unwrap();
            assert!((full - empty).abs() < 1e-9);
            assert!((empty - bp.point.relevance).abs() < 1e-9);
        }
    }

    #[test]
    fn nonpositive_s_rejected() {
        let m = scalar_model();
        assert!(matches!(boundary_at_s(&m, 0.0, FieldFactor::Real), Err(DibError::Usage(_))));
        assert!(matches!(boundary_at_rate(&m, -1.0, FieldFactor::Real), Err(DibError::Usage(_))));
    }
}

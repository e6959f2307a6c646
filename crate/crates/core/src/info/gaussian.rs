//! Gaussian distribution algebra and the linear observation model
//! `X_k = H_k Y + N_k`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::{
    block_diag, inverse_spd, is_psd, logdet_psd, logdet_spd, max_asymmetry, min_eigenvalue,
    serde_rows, symmetrize, vstack, SYM_TOL,
};
use crate::error::{DibError, Result};

/// Multiplier on log-determinant information expressions: one half for
/// real-valued Gaussians, one for circularly-symmetric complex ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldFactor {
    #[default]
    Real,
    Complex,
}

impl FieldFactor {
    pub fn c(self) -> f64 {
        match self {
            FieldFactor::Real => 0.5,
            FieldFactor::Complex => 1.0,
        }
    }

    /// Differential entropy of a Gaussian with covariance `cov`.
    pub fn entropy(self, cov: &DMatrix<f64>) -> f64 {
        let n = cov.nrows() as f64;
        let e = std::f64::consts::E;
        let pi = std::f64::consts::PI;
        match self {
            FieldFactor::Real => 0.5 * (n * (2.0 * pi * e).ln() + logdet_psd(cov)),
            FieldFactor::Complex => n * (pi * e).ln() + logdet_psd(cov),
        }
    }
}

impl std::str::FromStr for FieldFactor {
    type Err = DibError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(FieldFactor::Real),
            "complex" => Ok(FieldFactor::Complex),
            other => Err(DibError::Usage(format!("unknown field '{other}' (real|complex)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDist {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianDist {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(DibError::Dimension(format!(
                "mean of length {} with covariance {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        if max_asymmetry(&cov) > SYM_TOL {
            return Err(DibError::InvalidDistribution("covariance is not symmetric".into()));
        }
        if !is_psd(&cov) {
            return Err(DibError::InvalidDistribution(format!(
                "covariance has eigenvalue {:.3e} < 0",
                min_eigenvalue(&cov)
            )));
        }
        Ok(GaussianDist { mean, cov })
    }

    pub fn zero_mean(cov: DMatrix<f64>) -> Result<Self> {
        GaussianDist::new(DVector::zeros(cov.nrows()), cov)
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// `D(p||q)` for real Gaussians:
/// `0.5 [ (m1-m2)' S2^-1 (m1-m2) + ln|S2 S1^-1| - d + tr(S2^-1 S1) ]`.
pub fn kl_gaussian(p: &GaussianDist, q: &GaussianDist) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(DibError::Dimension(format!(
            "kl between dimensions {} and {}",
            p.dim(),
            q.dim()
        )));
    }
    let q_inv = inverse_spd(&q.cov, "covariance of the second argument (singular; kl needs it invertible)")?;
    let diff = &p.mean - &q.mean;
    let maha = (diff.transpose() * &q_inv * &diff)[(0, 0)];
    let trace = (&q_inv * &p.cov).trace();
    let ld_q = logdet_spd(&q.cov, "second covariance")?;
    let ld_p = logdet_psd(&p.cov);
    if ld_p == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    let d = p.dim() as f64;
    Ok((0.5 * (maha + ld_q - ld_p - d + trace)).max(0.0))
}

/// Parameters of `A | B` for a zero-mean joint Gaussian over `(A, B)`:
/// `E[A|B=b] = gain * b`, `Cov[A|B] = cov`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianConditional {
    pub gain: DMatrix<f64>,
    pub cov: DMatrix<f64>,
}

/// Conditions the first `split` coordinates on the rest (Schur complement).
pub fn gaussian_conditional(joint: &GaussianDist, split: usize) -> Result<GaussianConditional> {
    conditional_from_cov(joint.cov(), split)
}

pub(crate) fn conditional_from_cov(cov: &DMatrix<f64>, split: usize) -> Result<GaussianConditional> {
    let n = cov.nrows();
    if split == 0 || split > n {
        return Err(DibError::Dimension(format!(
            "split {split} for a {n}-dimensional Gaussian"
        )));
    }
    let m = n - split;
    let s_a = cov.view((0, 0), (split, split)).into_owned();
    if m == 0 {
        return Ok(GaussianConditional {
            gain: DMatrix::zeros(split, 0),
            cov: s_a,
        });
    }
    let s_ab = cov.view((0, split), (split, m)).into_owned();
    let s_b = cov.view((split, split), (m, m)).into_owned();
    let s_b_inv = inverse_spd(&s_b, "conditioning covariance")?;
    let gain = &s_ab * s_b_inv;
    let cond = symmetrize(&(s_a - &gain * s_ab.transpose()));
    Ok(GaussianConditional { gain, cov: cond })
}

/// One observation channel `X_k = H_k Y + N_k`, `N_k ~ N(0, sigma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianChannel {
    #[serde(with = "serde_rows")]
    pub h: DMatrix<f64>,
    #[serde(with = "serde_rows")]
    pub sigma: DMatrix<f64>,
}

/// Linear Gaussian multiview model. Every view is conditionally independent
/// of the others given `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct LinearGaussianModel {
    sigma_y: DMatrix<f64>,
    channels: Vec<GaussianChannel>,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    #[serde(with = "serde_rows")]
    sigma_y: DMatrix<f64>,
    channels: Vec<GaussianChannel>,
}

impl TryFrom<RawModel> for LinearGaussianModel {
    type Error = DibError;
    fn try_from(raw: RawModel) -> Result<Self> {
        LinearGaussianModel::new(raw.sigma_y, raw.channels)
    }
}

impl From<LinearGaussianModel> for RawModel {
    fn from(m: LinearGaussianModel) -> Self {
        RawModel {
            sigma_y: m.sigma_y,
            channels: m.channels,
        }
    }
}

impl LinearGaussianModel {
    pub fn new(sigma_y: DMatrix<f64>, channels: Vec<GaussianChannel>) -> Result<Self> {
        let ny = sigma_y.nrows();
        if ny == 0 || !sigma_y.is_square() {
            return Err(DibError::Dimension("target covariance must be square and non-empty".into()));
        }
        if !is_psd(&sigma_y) {
            return Err(DibError::InvalidDistribution("target covariance is not PSD".into()));
        }
        if channels.is_empty() {
            return Err(DibError::Dimension("need at least one channel".into()));
        }
        for (k, ch) in channels.iter().enumerate() {
            let nk = ch.h.nrows();
            if nk == 0 || ch.h.ncols() != ny {
                return Err(DibError::Dimension(format!(
                    "channel {k}: H is {}x{}, target dimension is {ny}",
                    ch.h.nrows(),
                    ch.h.ncols()
                )));
            }
            if ch.sigma.shape() != (nk, nk) {
                return Err(DibError::Dimension(format!(
                    "channel {k}: noise covariance is {:?}, expected {nk}x{nk}",
                    ch.sigma.shape()
                )));
            }
            if max_asymmetry(&ch.sigma) > SYM_TOL || ch.sigma.clone().cholesky().is_none() {
                return Err(DibError::InvalidDistribution(format!(
                    "channel {k}: noise covariance must be symmetric positive definite"
                )));
            }
        }
        Ok(LinearGaussianModel { sigma_y, channels })
    }

    /// Unit-variance scalar target seen through scalar unit-noise channels
    /// with the given gains.
    pub fn scalar(gains: &[f64]) -> Result<Self> {
        let channels = gains
            .iter()
            .map(|&g| GaussianChannel {
                h: DMatrix::from_element(1, 1, g),
                sigma: DMatrix::identity(1, 1),
            })
            .collect();
        LinearGaussianModel::new(DMatrix::identity(1, 1), channels)
    }

    pub fn sigma_y(&self) -> &DMatrix<f64> {
        &self.sigma_y
    }

    pub fn channels(&self) -> &[GaussianChannel] {
        &self.channels
    }

    pub fn channel(&self, k: usize) -> &GaussianChannel {
        &self.channels[k]
    }

    pub fn n_y(&self) -> usize {
        self.sigma_y.nrows()
    }

    pub fn num_views(&self) -> usize {
        self.channels.len()
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.channels.iter().map(|c| c.h.nrows()).collect()
    }

    /// `Cov[X_j, X_k]`.
    pub fn cross_cov(&self, j: usize, k: usize) -> DMatrix<f64> {
        let hj = &self.channels[j].h;
        let hk = &self.channels[k].h;
        let mut c = hj * &self.sigma_y * hk.transpose();
        if j == k {
            c += &self.channels[k].sigma;
            c = symmetrize(&c);
        }
        c
    }

    pub fn cov_x(&self, k: usize) -> DMatrix<f64> {
        self.cross_cov(k, k)
    }

    /// `Cov[Y, X_k] = Sigma_y H_k'`.
    pub fn cov_y_x(&self, k: usize) -> DMatrix<f64> {
        &self.sigma_y * self.channels[k].h.transpose()
    }

    /// Covariance of the stacked vector `(Y, X_1, ..., X_K)`.
    pub fn joint_cov(&self) -> DMatrix<f64> {
        let ny = self.n_y();
        let dims = self.view_dims();
        let total = ny + dims.iter().sum::<usize>();
        let mut out = DMatrix::zeros(total, total);
        out.view_mut((0, 0), (ny, ny)).copy_from(&self.sigma_y);
        let mut offsets = Vec::with_capacity(dims.len());
        let mut off = ny;
        for &d in &dims {
            offsets.push(off);
            off += d;
        }
        for j in 0..dims.len() {
            let yx = self.cov_y_x(j);
            out.view_mut((0, offsets[j]), (ny, dims[j])).copy_from(&yx);
            out.view_mut((offsets[j], 0), (dims[j], ny)).copy_from(&yx.transpose());
            for k in 0..dims.len() {
                out.view_mut((offsets[j], offsets[k]), (dims[j], dims[k]))
                    .copy_from(&self.cross_cov(j, k));
            }
        }
        symmetrize(&out)
    }

    /// The single-view model observing all views jointly.
    pub fn stacked(&self) -> LinearGaussianModel {
        let h = vstack(&self.channels.iter().map(|c| c.h.clone()).collect::<Vec<_>>());
        let sigma = block_diag(&self.channels.iter().map(|c| c.sigma.clone()).collect::<Vec<_>>());
        LinearGaussianModel {
            sigma_y: self.sigma_y.clone(),
            channels: vec![GaussianChannel { h, sigma }],
        }
    }

    /// `I(Y; X_1, ..., X_K)`, the largest achievable relevance.
    pub fn relevance_limit(&self, field: FieldFactor) -> f64 {
        let ny = self.n_y();
        let mut precision_gain = DMatrix::<f64>::identity(ny, ny);
        let root = super::linalg::sqrt_psd(&self.sigma_y);
        for ch in &self.channels {
            let s_inv = inverse_spd(&ch.sigma, "noise").expect("validated at construction");
            precision_gain += &root * ch.h.transpose() * s_inv * &ch.h * &root;
        }
        field.c() * logdet_psd(&precision_gain)
    }

    /// Recovers `(H_k, Sigma_k)` from a covariance of `(Y, X_1, ..., X_K)`
    /// under the conditional-independence structure.
    pub fn from_joint_cov(cov: &DMatrix<f64>, n_y: usize, dims: &[usize]) -> Result<Self> {
        let total = n_y + dims.iter().sum::<usize>();
        if cov.shape() != (total, total) {
            return Err(DibError::Dimension(format!(
                "joint covariance is {:?}, expected {total}x{total}",
                cov.shape()
            )));
        }
        let sigma_y = symmetrize(&cov.view((0, 0), (n_y, n_y)).into_owned());
        let sy_inv = inverse_spd(&sigma_y, "target covariance")?;
        let mut channels = Vec::with_capacity(dims.len());
        let mut off = n_y;
        for &d in dims {
            let s_xy = cov.view((off, 0), (d, n_y)).into_owned();
            let s_x = cov.view((off, off), (d, d)).into_owned();
            let h = &s_xy * &sy_inv;
            let sigma = symmetrize(&(s_x - &h * &sigma_y * h.transpose()));
            channels.push(GaussianChannel { h, sigma });
            off += d;
        }
        LinearGaussianModel::new(sigma_y, channels)
    }
}

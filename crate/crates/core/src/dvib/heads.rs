//! Distribution heads and their per-sample log-densities.

use serde::{Deserialize, Serialize};

pub const ENCODER_LOG_VAR_RANGE: (f64, f64) = (-15.0, 15.0);
pub const DECODER_LOG_VAR_RANGE: (f64, f64) = (-10.0, 10.0);

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Diagonal Gaussian `N(mu, diag(exp(log_var)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianHead {
    pub mu: Vec<f64>,
    pub log_var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalHead {
    pub logits: Vec<f64>,
}

/// `mu + exp(log_var / 2) * noise`.
pub fn reparam_sample(head: &GaussianHead, noise: &[f64]) -> Vec<f64> {
    assert_eq!(noise.len(), head.mu.len(), "noise dimension must match the latent");
    head.mu
        .iter()
        .zip(&head.log_var)
        .zip(noise)
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect()
}

/// `KL(N(mu, diag(exp(log_var))) || N(0, I))`.
pub fn kl_to_standard_normal(head: &GaussianHead) -> f64 {
    0.5 * head
        .mu
        .iter()
        .zip(&head.log_var)
        .map(|(m, lv)| lv.exp() + m * m - 1.0 - lv)
        .sum::<f64>()
}

/// `ln N(y; mu, diag(exp(log_var)))`, normalization included.
pub fn gaussian_log_density(y: &[f64], head: &GaussianHead) -> f64 {
    y.iter()
        .zip(&head.mu)
        .zip(&head.log_var)
        .map(|((y, m), lv)| -0.5 * (LN_2PI + lv + (y - m) * (y - m) * (-lv).exp()))
        .sum()
}

/// `ln softmax(logits)[label]`.
pub fn categorical_log_prob(label: usize, head: &CategoricalHead) -> f64 {
    head.logits[label] - log_sum_exp(&head.logits)
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|l| (l - lse).exp()).collect()
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub(crate) fn clamp(v: f64, range: (f64, f64)) -> (f64, bool) {
    if v < range.0 {
        (range.0, false)
    } else if v > range.1 {
        (range.1, false)
    } else {
        (v, true)
    }
}

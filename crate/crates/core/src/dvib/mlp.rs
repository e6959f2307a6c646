//! Fully-connected rectifier networks over a flat parameter vector.
//!
//! A dense layer with `n_in` inputs and `n_out` outputs owns
//! `n_out * n_in` weights (row-major, one row per output unit) followed by
//! `n_out` biases. Because the weights are row-major, the same slice read as
//! a column-major `n_in x n_out` matrix is `W'`, so batches (one sample per
//! row) go through as `X W' + 1 b'` without copying.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};
use serde::{Deserialize, Serialize};

use crate::error::{DibError, Result};
use crate::rng::SeededRng;

/// Widths of a rectifier network; every hidden layer is followed by a ReLU,
/// the output layer is affine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
}

impl MlpSpec {
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input);
        w.extend(&self.hidden);
        w.push(self.output);
        w
    }

    pub fn num_params(&self) -> usize {
        self.widths().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn validate(&self) -> Result<()> {
        if self.widths().contains(&0) {
            return Err(DibError::Dimension(format!("network widths must be positive: {:?}", self.widths())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSlot {
    pub weights: usize,
    pub biases: usize,
    pub inputs: usize,
    pub outputs: usize,
}

/// Where one network lives inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetLayout {
    pub name: String,
    pub spec: MlpSpec,
    pub offset: usize,
    pub layers: Vec<LayerSlot>,
}

impl NetLayout {
    pub fn new(name: impl Into<String>, spec: MlpSpec, offset: usize) -> Result<Self> {
        spec.validate()?;
        let mut at = offset;
        let layers = spec
            .widths()
            .windows(2)
            .map(|w| {
                let slot = LayerSlot {
                    weights: at,
                    biases: at + w[0] * w[1],
                    inputs: w[0],
                    outputs: w[1],
                };
                at += w[0] * w[1] + w[1];
                slot
            })
            .collect();
        Ok(NetLayout {
            name: name.into(),
            spec,
            offset,
            layers,
        })
    }

    pub fn end(&self) -> usize {
        self.offset + self.spec.num_params()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(&self, params: &mut [f64], rng: &mut SeededRng) {
        for l in &self.layers {
            let limit = (6.0 / (l.inputs + l.outputs) as f64).sqrt();
            for w in &mut params[l.weights..l.biases] {
                *w = limit * (2.0 * rng.uniform() - 1.0);
            }
            params[l.biases..l.biases + l.outputs].iter_mut().for_each(|b| *b = 0.0);
        }
    }

    /// Forward pass over a batch (one sample per row).
    pub fn forward(&self, params: &[f64], x: &DMatrix<f64>) -> Result<(DMatrix<f64>, Tape)> {
        if x.ncols() != self.spec.input {
            return Err(DibError::Dimension(format!(
                "{} expects {} inputs, got {}",
                self.name,
                self.spec.input,
                x.ncols()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let wt = DMatrixView::from_slice(&params[l.weights..l.biases], l.inputs, l.outputs);
            let mut z = &h * wt;
            for (j, b) in params[l.biases..l.biases + l.outputs].iter().enumerate() {
                z.column_mut(j).add_scalar_mut(*b);
            }
            if i < last {
                z.apply(|v| *v = v.max(0.0));
            }
            inputs.push(h);
            h = z;
        }
        Ok((h, Tape { inputs }))
    }

    /// Smallest absolute hidden pre-activation over the batch: how far the
    /// inputs sit from a rectifier kink. Infinite for networks without
    /// hidden layers.
    pub fn relu_margin(&self, params: &[f64], x: &DMatrix<f64>) -> Result<f64> {
        let (_, tape) = self.forward(params, x)?;
        let mut margin = f64::INFINITY;
        for i in 1..self.layers.len() {
            let prev = &self.layers[i - 1];
            let wt = DMatrixView::from_slice(&params[prev.weights..prev.biases], prev.inputs, prev.outputs);
            let mut z = &tape.inputs[i - 1] * wt;
            for (j, b) in params[prev.biases..prev.biases + prev.outputs].iter().enumerate() {
                z.column_mut(j).add_scalar_mut(*b);
            }
            margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
        }
        Ok(margin)
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d output`;
    /// returns `d loss / d input`.
    pub fn backward(&self, params: &[f64], tape: &Tape, d_out: &DMatrix<f64>, grad: &mut [f64]) -> DMatrix<f64> {
        let mut d = d_out.clone();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let input = &tape.inputs[i];
            {
                let (w_part, b_part) = grad[l.weights..l.biases + l.outputs].split_at_mut(l.biases - l.weights);
                let mut gwt = DMatrixViewMut::from_slice(w_part, l.inputs, l.outputs);
                gwt.gemm_tr(1.0, input, &d, 1.0);
                for (j, gb) in b_part.iter_mut().enumerate() {
                    *gb += d.column(j).sum();
                }
            }
            let wt = DMatrixView::from_slice(&params[l.weights..l.biases], l.inputs, l.outputs);
            let mut d_in = &d * wt.transpose();
            if i > 0 {
                // the stored input of layer i is the rectified output of layer i-1
                d_in.zip_apply(input, |g, a| {
                    if a <= 0.0 {
                        *g = 0.0
                    }
                });
            }
            d = d_in;
        }
        d
    }
}

/// Layer inputs saved by [`NetLayout::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    inputs: Vec<DMatrix<f64>>,
}

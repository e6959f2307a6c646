//! Discrete distributions and their information measures. All values in nats.

use serde::{Deserialize, Serialize};

use super::tensor::{self, for_each_index, marginalize};
use crate::error::{DibError, Result};

/// Tolerance on the total mass of a pmf.
pub const MASS_TOL: f64 = 1e-9;

/// Tolerance for the conditional-independence check.
pub const MARKOV_TOL: f64 = 1e-9;

/// `x ln x` with the `0 ln 0 = 0` convention.
#[inline]
pub(crate) fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

pub(crate) fn entropy_of(p: &[f64]) -> f64 {
    -p.iter().map(|&v| xlogx(v)).sum::<f64>()
}

/// `sum p ln(p/q)`; `+inf` when some `p_i > 0` meets `q_i = 0`.
pub(crate) fn kl_slices(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            acc += pi * (pi / qi).ln();
        }
    }
    acc
}

fn check_mass(probs: &[f64], what: &str) -> Result<()> {
    if probs.is_empty() {
        return Err(DibError::InvalidDistribution(format!("{what}: empty alphabet")));
    }
    if let Some(bad) = probs.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(DibError::InvalidDistribution(format!(
            "{what}: entry {bad} is not a non-negative finite number"
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(DibError::InvalidDistribution(format!(
            "{what}: total mass {total} differs from 1"
        )));
    }
    Ok(())
}

/// A probability mass function over `0..len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DiscretePmf {
    probs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for DiscretePmf {
    type Error = DibError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        DiscretePmf::new(v)
    }
}

impl From<DiscretePmf> for Vec<f64> {
    fn from(p: DiscretePmf) -> Self {
        p.probs
    }
}

impl DiscretePmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_mass(&probs, "pmf")?;
        Ok(DiscretePmf { probs })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(DibError::InvalidDistribution(format!(
                "weights sum to {total}"
            )));
        }
        DiscretePmf::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "alphabet size must be positive");
        DiscretePmf {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        assert!(at < n);
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        DiscretePmf { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Shannon entropy in nats.
pub fn entropy(p: &DiscretePmf) -> f64 {
    entropy_of(p.probs())
}

/// Relative entropy `D(p||q)`; `+inf` when `p` is not absolutely continuous
/// with respect to `q`.
pub fn kl_discrete(p: &DiscretePmf, q: &DiscretePmf) -> Result<f64> {
    if p.len() != q.len() {
        return Err(DibError::Dimension(format!(
            "kl between alphabets of size {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(kl_slices(p.probs(), q.probs()))
}

/// A row-stochastic matrix: row `i` is the law of the output given input `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConditional")]
pub struct ConditionalPmf {
    rows: usize,
    cols: usize,
    table: Vec<f64>,
}

#[derive(Deserialize)]
struct RawConditional {
    rows: usize,
    cols: usize,
    table: Vec<f64>,
}

impl TryFrom<RawConditional> for ConditionalPmf {
    type Error = DibError;
    fn try_from(r: RawConditional) -> Result<Self> {
        ConditionalPmf::new(r.rows, r.cols, r.table)
    }
}

impl ConditionalPmf {
    pub fn new(rows: usize, cols: usize, table: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || table.len() != rows * cols {
            return Err(DibError::Dimension(format!(
                "conditional pmf {rows}x{cols} with {} entries",
                table.len()
            )));
        }
        for r in 0..rows {
            check_mass(&table[r * cols..(r + 1) * cols], &format!("row {r}"))?;
        }
        Ok(ConditionalPmf { rows, cols, table })
    }

    pub(crate) fn new_unchecked(rows: usize, cols: usize, table: Vec<f64>) -> Self {
        debug_assert_eq!(table.len(), rows * cols);
        ConditionalPmf { rows, cols, table }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(DibError::Dimension("ragged rows".into()));
        }
        ConditionalPmf::new(r, c, rows.into_iter().flatten().collect())
    }

    pub fn identity(n: usize) -> Self {
        let mut table = vec![0.0; n * n];
        for i in 0..n {
            table[i * n + i] = 1.0;
        }
        ConditionalPmf::new_unchecked(n, n, table)
    }

    /// Every row equal to `p`.
    pub fn constant(rows: usize, p: &DiscretePmf) -> Self {
        let table = (0..rows).flat_map(|_| p.probs().iter().copied()).collect();
        ConditionalPmf::new_unchecked(rows, p.len(), table)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.table[i * self.cols..(i + 1) * self.cols]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.table[row * self.cols + col]
    }

    pub fn max_abs_diff(&self, other: &ConditionalPmf) -> f64 {
        self.table
            .iter()
            .zip(&other.table)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Result of the conditional-independence check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovCheck {
    pub holds: bool,
    pub max_deviation: f64,
}

/// Joint pmf over `X_1 x ... x X_K x Y`. Axis `k < K` is view `k`; the last
/// axis is the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJoint")]
pub struct JointPmf {
    dims: Vec<usize>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawJoint {
    dims: Vec<usize>,
    probs: Vec<f64>,
}

impl TryFrom<RawJoint> for JointPmf {
    type Error = DibError;
    fn try_from(r: RawJoint) -> Result<Self> {
        JointPmf::new(r.dims, r.probs)
    }
}

impl JointPmf {
    pub fn new(dims: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(DibError::Dimension(
                "a joint pmf needs at least one view and a target axis".into(),
            ));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(DibError::Dimension("alphabet sizes must be positive".into()));
        }
        if tensor::num_elements(&dims) != probs.len() {
            return Err(DibError::Dimension(format!(
                "tensor of shape {dims:?} given {} entries",
                probs.len()
            )));
        }
        check_mass(&probs, "joint pmf")?;
        Ok(JointPmf { dims, probs })
    }

    /// Builds `p(y) prod_k p(x_k|y)`; `channels[k]` has one row per target
    /// symbol.
    pub fn from_factors(p_y: &DiscretePmf, channels: &[ConditionalPmf]) -> Result<Self> {
        if channels.is_empty() {
            return Err(DibError::Dimension("need at least one view".into()));
        }
        if let Some(c) = channels.iter().find(|c| c.rows() != p_y.len()) {
            return Err(DibError::Dimension(format!(
                "channel has {} rows, target alphabet has {}",
                c.rows(),
                p_y.len()
            )));
        }
        let mut dims: Vec<usize> = channels.iter().map(ConditionalPmf::cols).collect();
        dims.push(p_y.len());
        let k = channels.len();
        let mut probs = vec![0.0; tensor::num_elements(&dims)];
        for_each_index(&dims, |idx, flat| {
            let y = idx[k];
            let mut v = p_y.probs()[y];
            for (c, &x) in channels.iter().zip(idx) {
                v *= c.get(y, x);
            }
            probs[flat] = v;
        });
        JointPmf::new(dims, probs)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Number of views `K`.
    pub fn num_views(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn y_axis(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn y_size(&self) -> usize {
        self.dims[self.y_axis()]
    }

    pub fn view_size(&self, k: usize) -> usize {
        self.dims[k]
    }

    /// Marginal over a strictly increasing list of axes.
    pub fn marginal(&self, axes: &[usize]) -> Vec<f64> {
        marginalize(&self.dims, &self.probs, axes)
    }

    pub fn p_y(&self) -> DiscretePmf {
        DiscretePmf {
            probs: self.marginal(&[self.y_axis()]),
        }
    }

    pub fn p_x(&self, k: usize) -> DiscretePmf {
        DiscretePmf {
            probs: self.marginal(&[k]),
        }
    }

    /// `p(x_k | y)` with one row per target symbol; rows of zero-probability
    /// targets are uniform.
    pub fn x_given_y(&self, k: usize) -> ConditionalPmf {
        let ny = self.y_size();
        let nx = self.dims[k];
        let xy = self.marginal(&[k, self.y_axis()]);
        let mut table = vec![0.0; ny * nx];
        for y in 0..ny {
            let py: f64 = (0..nx).map(|x| xy[x * ny + y]).sum();
            for x in 0..nx {
                table[y * nx + x] = if py > 0.0 { xy[x * ny + y] / py } else { 1.0 / nx as f64 };
            }
        }
        ConditionalPmf::new_unchecked(ny, nx, table)
    }

    pub fn entropy_of_axes(&self, axes: &[usize]) -> f64 {
        entropy_of(&self.marginal(axes))
    }

    /// `I(A;B)` between two disjoint groups of axes.
    pub fn mutual_information(&self, group_a: &[usize], group_b: &[usize]) -> Result<f64> {
        let n = self.dims.len();
        for &a in group_a.iter().chain(group_b) {
            if a >= n {
                return Err(DibError::Usage(format!("axis {a} out of range (tensor has {n})")));
            }
        }
        if group_a.iter().any(|a| group_b.contains(a)) {
            return Err(DibError::Usage("mutual information groups overlap".into()));
        }
        let sorted = |g: &[usize]| {
            let mut v = g.to_vec();
            v.sort_unstable();
            v.dedup();
            v
        };
        let a = sorted(group_a);
        let b = sorted(group_b);
        let ab = sorted(&[group_a, group_b].concat());
        let mi = self.entropy_of_axes(&a) + self.entropy_of_axes(&b) - self.entropy_of_axes(&ab);
        Ok(mi.max(0.0))
    }

    /// Compares the joint against `p(y) prod_k p(x_k|y)`.
    pub fn validate_markov(&self) -> MarkovCheck {
        let k = self.num_views();
        let p_y = self.p_y();
        let channels: Vec<ConditionalPmf> = (0..k).map(|v| self.x_given_y(v)).collect();
        let mut max_dev: f64 = 0.0;
        for_each_index(&self.dims, |idx, flat| {
            let y = idx[k];
            let mut v = p_y.probs()[y];
            for (c, &x) in channels.iter().zip(idx) {
                v *= c.get(y, x);
            }
            max_dev = max_dev.max((self.probs[flat] - v).abs());
        });
        MarkovCheck {
            holds: max_dev <= MARKOV_TOL,
            max_deviation: max_dev,
        }
    }
}

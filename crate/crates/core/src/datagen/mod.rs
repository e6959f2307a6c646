//! Synthetic models and datasets.
//!
//! All generators are pure functions of their seed; see [`crate::rng`] for
//! the stream layout. Stream tags used here:
//!
//! | tag | use                                  |
//! |-----|--------------------------------------|
//! | 2   | Gaussian dataset sampling            |
//! | 3   | random linear model matrices         |
//! | 4   | toy discrete joint pmfs              |
//! | 5   | classification mixtures              |
//! | 6   | sampling from a discrete joint       |

mod dataset;

pub use dataset::{
    read_dataset, write_csv, write_dataset, DatasetMeta, MultiviewDataset, Targets, ViewData,
    DATASET_FORMAT, DATASET_VERSION,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{DibError, Result};
use crate::info::linalg::sqrt_psd;
use crate::info::{ConditionalPmf, DiscretePmf, FieldFactor, GaussianChannel, JointPmf, LinearGaussianModel};
use crate::rng::{derive_stream, SeededRng};

/// `Y ~ N(0, I)`, `X_k = H_k Y + N_k` with `N_k ~ N(0, I)` and `H_k` entries
/// iid standard normal, drawn view by view in row-major order.
pub fn random_model(n_y: usize, dims: &[usize], seed: u64) -> Result<LinearGaussianModel> {
    if n_y == 0 || dims.is_empty() || dims.contains(&0) {
        return Err(DibError::Usage(format!(
            "dimensions must be positive (n_y = {n_y}, views = {dims:?})"
        )));
    }
    let mut rng = SeededRng::with_stream(seed, derive_stream(3, 0));
    let channels = dims
        .iter()
        .map(|&nk| {
            let h = DMatrix::from_row_iterator(nk, n_y, (0..nk * n_y).map(|_| rng.normal()).collect::<Vec<_>>());
            GaussianChannel {
                h,
                sigma: DMatrix::identity(nk, nk),
            }
        })
        .collect();
    LinearGaussianModel::new(DMatrix::identity(n_y, n_y), channels)
}

fn cov_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    match cov.clone().cholesky() {
        Some(c) => c.l(),
        None => sqrt_psd(cov),
    }
}

/// Ancestral sampling: `Y` first, then each view, sample by sample.
pub fn sample_gaussian(model: &LinearGaussianModel, n: usize, seed: u64) -> Result<MultiviewDataset> {
    if n == 0 {
        return Err(DibError::Usage("sample count must be at least 1".into()));
    }
    let mut rng = SeededRng::with_stream(seed, derive_stream(2, 0));
    let ny = model.n_y();
    let dims = model.view_dims();
    let l_y = cov_factor(model.sigma_y());
    let l_k: Vec<DMatrix<f64>> = model.channels().iter().map(|c| cov_factor(&c.sigma)).collect();
    let mut targets = Vec::with_capacity(n * ny);
    let mut views: Vec<Vec<f64>> = dims.iter().map(|&d| Vec::with_capacity(n * d)).collect();
    let mut z_y = DVector::zeros(ny);
    for _ in 0..n {
        rng.fill_normal(z_y.as_mut_slice());
        let y = &l_y * &z_y;
        targets.extend(y.iter());
        for (k, ch) in model.channels().iter().enumerate() {
            let mut z = DVector::zeros(dims[k]);
            rng.fill_normal(z.as_mut_slice());
            let x = &ch.h * &y + &l_k[k] * z;
            views[k].extend(x.iter());
        }
    }
    Ok(MultiviewDataset::new(
        views
            .into_iter()
            .zip(&dims)
            .map(|(values, &dim)| ViewData::Real { dim, values })
            .collect(),
        Targets::Real { dim: ny, values: targets },
        DatasetMeta {
            generator: "linear-gaussian".into(),
            seed,
            field: FieldFactor::Real,
            target_entropy: Some(FieldFactor::Real.entropy(model.sigma_y())),
            model: Some(model.clone()),
        },
    )?)
}

/// Fixture families for the discrete solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ToyJointSpec {
    /// `Y` uniform; every view an exact copy of `Y`.
    Copy { views: usize, alphabet: usize },
    /// Views independent of `Y`.
    Independent { y: usize, views: Vec<usize> },
    /// Random `p(y)` and random channels `p(x_k|y)`.
    Random { y: usize, views: Vec<usize> },
}

fn random_simplex(n: usize, rng: &mut SeededRng) -> DiscretePmf {
    // normalized unit exponentials: a flat Dirichlet draw
    let w: Vec<f64> = (0..n).map(|_| rng.exponential()).collect();
    DiscretePmf::from_weights(w).expect("exponentials are positive")
}

/// Markov-consistent joint `p(y) prod_k p(x_k|y)`.
pub fn toy_discrete_joint(spec: &ToyJointSpec, seed: u64) -> Result<JointPmf> {
    let mut rng = SeededRng::with_stream(seed, derive_stream(4, 0));
    match spec {
        ToyJointSpec::Copy { views, alphabet } => {
            if *alphabet < 2 || *views == 0 {
                return Err(DibError::Usage("copy fixture needs alphabet >= 2 and a view".into()));
            }
            let channels = vec![ConditionalPmf::identity(*alphabet); *views];
            JointPmf::from_factors(&DiscretePmf::uniform(*alphabet), &channels)
        }
        ToyJointSpec::Independent { y, views } | ToyJointSpec::Random { y, views } => {
            if *y < 2 || views.is_empty() || views.iter().any(|&v| v < 2) {
                return Err(DibError::Usage("alphabet sizes must be at least 2".into()));
            }
            let p_y = random_simplex(*y, &mut rng);
            let independent = matches!(spec, ToyJointSpec::Independent { .. });
            let channels = views
                .iter()
                .map(|&nx| {
                    if independent {
                        ConditionalPmf::constant(*y, &random_simplex(nx, &mut rng))
                    } else {
                        let rows = (0..*y).map(|_| random_simplex(nx, &mut rng).probs().to_vec()).collect();
                        ConditionalPmf::from_rows(rows).expect("rows are pmfs")
                    }
                })
                .collect::<Vec<_>>();
            JointPmf::from_factors(&p_y, &channels)
        }
    }
}

/// Draws `n` iid tuples from a discrete joint: symbol views, label targets.
pub fn sample_discrete(joint: &JointPmf, n: usize, seed: u64) -> Result<MultiviewDataset> {
    if n == 0 {
        return Err(DibError::Usage("sample count must be at least 1".into()));
    }
    let mut rng = SeededRng::with_stream(seed, derive_stream(6, 0));
    let dims = joint.dims();
    let strides = crate::info::tensor::strides(dims);
    let mut cdf = Vec::with_capacity(joint.probs().len());
    let mut acc = 0.0;
    for &p in joint.probs() {
        acc += p;
        cdf.push(acc);
    }
    let k = joint.num_views();
    let mut views = vec![Vec::with_capacity(n); k];
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.uniform() * acc;
        let cell = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        for (axis, v) in views.iter_mut().enumerate() {
            v.push(((cell / strides[axis]) % dims[axis]) as i64);
        }
        labels.push(((cell / strides[k]) % dims[k]) as i64);
    }
    MultiviewDataset::new(
        views
            .into_iter()
            .enumerate()
            .map(|(a, symbols)| ViewData::Symbols {
                alphabet: dims[a],
                symbols,
            })
            .collect(),
        Targets::Labels {
            classes: joint.y_size(),
            labels,
        },
        DatasetMeta {
            generator: "discrete-joint".into(),
            seed,
            field: FieldFactor::Real,
            target_entropy: Some(crate::discrete_ba::target_entropy(joint)),
            model: None,
        },
    )
}

/// Gaussian class-conditional views: `X_k = mu_{k,Y} + N(0, I)` with class
/// means drawn as `separation * N(0, I)` and uniform labels.
pub fn sample_classification(
    classes: usize,
    dims: &[usize],
    separation: f64,
    n: usize,
    seed: u64,
) -> Result<MultiviewDataset> {
    if classes < 2 || dims.is_empty() || dims.contains(&0) || n == 0 {
        return Err(DibError::Usage("need >= 2 classes, positive view dims and samples".into()));
    }
    let mut rng = SeededRng::with_stream(seed, derive_stream(5, 0));
    let means: Vec<Vec<f64>> = dims
        .iter()
        .map(|&d| (0..classes * d).map(|_| separation * rng.normal()).collect())
        .collect();
    let mut views: Vec<Vec<f64>> = dims.iter().map(|&d| Vec::with_capacity(n * d)).collect();
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.below(classes);
        labels.push(c as i64);
        for (k, &d) in dims.iter().enumerate() {
            for j in 0..d {
                views[k].push(means[k][c * d + j] + rng.normal());
            }
        }
    }
    MultiviewDataset::new(
        views
            .into_iter()
            .zip(dims)
            .map(|(values, &dim)| ViewData::Real { dim, values })
            .collect(),
        Targets::Labels { classes, labels },
        DatasetMeta {
            generator: format!("gaussian-classes(separation={separation})"),
            seed,
            field: FieldFactor::Real,
            target_entropy: None,
            model: None,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_model_shapes_and_determinism() {
        let a = random_model(1, &[3, 3], 11).unwrap();
        let b = random_model(1, &[3, 3], 11).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.view_dims(), vec![3, 3]);
        assert_eq!(a.n_y(), 1);
        let c = random_model(2, &[3, 3], 11).unwrap();
        assert_eq!(c.n_y(), 2);
        assert_eq!(c.channel(0).h.shape(), (3, 2));
        assert_ne!(a, random_model(1, &[3, 3], 12).unwrap());
    }

    #[test]
    fn toy_joints_are_markov() {
        for seed in 0..20 {
            for spec in [
                ToyJointSpec::Random { y: 3, views: vec![2, 3] },
                ToyJointSpec::Independent { y: 2, views: vec![2, 2, 2] },
                ToyJointSpec::Copy { views: 2, alphabet: 3 },
            ] {
                let j = toy_discrete_joint(&spec, seed).unwrap();
                assert!(j.validate_markov().holds);
            }
        }
    }

    #[test]
    fn copy_fixture() {
        let j = toy_discrete_joint(&ToyJointSpec::Copy { views: 2, alphabet: 2 }, 0).unwrap();
        assert_eq!(j.dims(), &[2, 2, 2]);
        assert_eq!(j.probs(), &[0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn independent_fixture_has_no_information() {
        let j = toy_discrete_joint(&ToyJointSpec::Independent { y: 3, views: vec![2, 2] }, 5).unwrap();
        assert!(j.mutual_information(&[0, 1], &[2]).unwrap() < 1e-12);
    }

    #[test]
    fn random_fixture_reproducible() {
        let spec = ToyJointSpec::Random { y: 2, views: vec![2, 2] };
        assert_eq!(toy_discrete_joint(&spec, 9).unwrap(), toy_discrete_joint(&spec, 9).unwrap());
        assert_ne!(toy_discrete_joint(&spec, 9).unwrap(), toy_discrete_joint(&spec, 10).unwrap());
    }

    #[test]
    fn noiseless_views_equal_projection() {
        let m = random_model(1, &[2], 3).unwrap();
        let quiet = LinearGaussianModel::new(
            m.sigma_y().clone(),
            vec![GaussianChannel {
                h: m.channel(0).h.clone(),
                sigma: DMatrix::identity(2, 2) * 1e-12,
            }],
        )
        .unwrap();
        let ds = sample_gaussian(&quiet, 500, 4).unwrap();
        let (y, x) = match (ds.targets(), ds.view(0)) {
            (Targets::Real { values: y, .. }, ViewData::Real { values: x, .. }) => (y, x),
            _ => unreachable!(),
        };
        let h = &quiet.channel(0).h;
        for i in 0..500 {
            for d in 0..2 {
                assert!((x[i * 2 + d] - h[(d, 0)] * y[i]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn zero_samples_rejected() {
        let m = random_model(1, &[1], 0).unwrap();
        assert!(matches!(sample_gaussian(&m, 0, 0), Err(DibError::Usage(_))));
    }
}

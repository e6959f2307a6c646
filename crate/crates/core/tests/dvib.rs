use dib_core::datagen::{sample_classification, toy_discrete_joint, DatasetMeta, MultiviewDataset, Targets, ToyJointSpec, ViewData};
use dib_core::dvib::*;
use dib_core::info::FieldFactor;
use dib_core::rng::SeededRng;
use nalgebra::DMatrix;

mod common;

#[test]
fn gradients_match_central_differences_on_random_nets() {
    let r = common::fd_check_random_nets(2024, 20);
    assert!(r.violations.is_empty(), "{:?}", r.violations);
    assert!(r.max_rel < common::FD_RTOL, "{}", r.max_rel);
    assert!(r.gaussian_heads > 0 && r.categorical_heads > 0);
}

#[test]
fn constant_cost_has_zero_gradient() {
    // all-zero parameters with s = 0: the main decoder ignores its input
    let arch = DvibArch {
        view_inputs: vec![2],
        latent_dims: vec![1],
        target: TargetKind::Categorical { classes: 3 },
        encoder_hidden: vec![],
        decoder_hidden: vec![],
    };
    let model = DvibModel::from_params(arch.clone(), vec![0.0; arch.layout().unwrap().total]).unwrap();
    let batch = Batch {
        views: vec![DMatrix::from_element(4, 2, 1.0)],
        targets: BatchTargets::Labels(vec![0, 1, 2, 0]),
    };
    let noise = NoiseBlock::zeros(4, 1, &[1]);
    let (terms, grad) = empirical_cost_grad(&model, &batch, &noise, 0.0, false).unwrap();
    assert!((terms.cost + 3f64.ln()).abs() < 1e-15);
    let layout = model.layout();
    for net in [layout.encoder(0), layout.side_decoder(0)] {
        assert!(grad[net.offset..net.end()].iter().all(|g| *g == 0.0));
    }
}

/// One-layer linear model where every expectation in the cost is closed form.
fn linear_gaussian_toy() -> (DvibModel, Batch, f64) {
    let arch = DvibArch {
        view_inputs: vec![1, 1],
        latent_dims: vec![1, 1],
        target: TargetKind::Gaussian { dim: 1 },
        encoder_hidden: vec![],
        decoder_hidden: vec![],
    };
    let layout = arch.layout().unwrap();
    let mut p = vec![0.0; layout.total];
    // encoders: mu = a_k x + c_k, log_var = e_k (weights rows: [mu], [log_var])
    let enc = [(0.8, 0.1, -0.4), (-1.2, 0.3, 0.2)];
    for (k, (a, c, e)) in enc.iter().enumerate() {
        let l = layout.encoder(k).layers[0];
        p[l.weights] = *a;
        p[l.biases] = *c;
        p[l.biases + 1] = *e;
    }
    // main: mean = w1 u1 + w2 u2 + b, log_var = v
    let l = layout.main_decoder().layers[0];
    p[l.weights] = 0.7;
    p[l.weights + 1] = -0.5;
    p[l.biases] = 0.05;
    p[l.biases + 1] = -0.3;
    let sides = [(1.1, -0.2, 0.4), (0.6, 0.1, -0.1)];
    for (k, (w, b, v)) in sides.iter().enumerate() {
        let l = layout.side_decoder(k).layers[0];
        p[l.weights] = *w;
        p[l.biases] = *b;
        p[l.biases + 1] = *v;
    }
    let model = DvibModel::from_params(arch, p).unwrap();
    let xs = [[0.3, -1.0], [1.5, 0.2], [-0.7, 0.9]];
    let ys = [0.4, -0.8, 1.3];
    let batch = Batch {
        views: (0..2).map(|k| DMatrix::from_fn(3, 1, |i, _| xs[i][k])).collect(),
        targets: BatchTargets::Real(DMatrix::from_column_slice(3, 1, &ys)),
    };
    let s = 0.6;
    let expected_ll = |y: f64, mean: f64, var_mean: f64, log_var: f64| {
        -0.5 * ((2.0 * std::f64::consts::PI).ln() + log_var + ((y - mean).powi(2) + var_mean) / log_var.exp())
    };
    let mut total = 0.0;
    for i in 0..3 {
        let mu: Vec<f64> = (0..2).map(|k| enc[k].0 * xs[i][k] + enc[k].1).collect();
        let var: Vec<f64> = (0..2).map(|k| enc[k].2.exp()).collect();
        let main = expected_ll(ys[i], 0.7 * mu[0] - 0.5 * mu[1] + 0.05, 0.49 * var[0] + 0.25 * var[1], -0.3);
        let mut v = main;
        for k in 0..2 {
            let (w, b, lv) = sides[k];
            v += s * expected_ll(ys[i], w * mu[k] + b, w * w * var[k], lv);
            v -= s * 0.5 * (var[k] + mu[k] * mu[k] - 1.0 - enc[k].2);
        }
        total += v;
    }
    (model, batch, total / 3.0)
}

#[test]
fn reparameterized_cost_is_unbiased() {
    let (model, batch, exact) = linear_gaussian_toy();
    let draws = 10_000;
    let (mut sum, mut sum2) = (0.0, 0.0);
    for seed in 0..draws {
        let c = empirical_cost_seeded(&model, &batch, 0.6, 1, seed, false).unwrap().cost;
        sum += c;
        sum2 += c * c;
    }
    let mean = sum / draws as f64;
    let se = ((sum2 / draws as f64 - mean * mean) / draws as f64).sqrt();
    assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact} (se {se})");
}

#[test]
fn cost_is_bit_identical_for_a_fixed_seed() {
    let (model, batch, _) = linear_gaussian_toy();
    let a = empirical_cost_seeded(&model, &batch, 0.6, 4, 77, false).unwrap();
    let b = empirical_cost_seeded(&model, &batch, 0.6, 4, 77, false).unwrap();
    assert_eq!(a.cost.to_bits(), b.cost.to_bits());
    assert!(empirical_cost_seeded(&model, &batch, 0.6, 0, 77, false).is_err());
}

fn small_config(s: f64, epochs: usize) -> TrainConfig {
    TrainConfig {
        s,
        epochs,
        latent_dims: vec![2],
        encoder_hidden: vec![16],
        decoder_hidden: vec![16],
        mc_eval: 4,
        ..TrainConfig::default()
    }
}

fn classification(n: usize, seed: u64) -> MultiviewDataset {
    sample_classification(3, &[2, 2], 2.0, n, seed).unwrap()
}

#[test]
fn training_is_deterministic() {
    let (ds, test) = classification(400, 1).split(300).unwrap();
    let cfg = small_config(0.01, 3);
    let (m1, t1) = train(&ds, Some(&test), &cfg).unwrap();
    let (m2, t2) = train(&ds, Some(&test), &cfg).unwrap();
    assert_eq!(t1, t2);
    assert_eq!(m1.params(), m2.params());
    assert_eq!(t1.records.len(), 3);
    let other = train(&ds, None, &TrainConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(other.0.params(), m1.params());
}

#[test]
fn complexity_never_falls_below_relevance_in_a_trace() {
    let (ds, test) = classification(3000, 3).split(2000).unwrap();
    let (_, trace) = train(&ds, Some(&test), &small_config(0.05, 15)).unwrap();
    for r in &trace.records {
        assert!(r.r_train.unwrap() >= r.delta_train.unwrap() - 1e-6, "{r:?}");
        assert!(r.r_test.unwrap() >= r.delta_test.unwrap() - 1e-6, "{r:?}");
    }
    let last = trace.last_evaluated().unwrap();
    assert!(last.delta_train.unwrap() > 0.3, "{last:?}");
}

#[test]
fn heavy_regularization_gives_uninformative_encoders() {
    let ds = classification(2000, 5);
    let (_, trace) = train(&ds, None, &small_config(10.0, 15)).unwrap();
    let last = trace.last_evaluated().unwrap();
    assert!(last.delta_train.unwrap().abs() < 0.05, "{last:?}");
    assert!(last.r_train.unwrap() < 0.1, "{last:?}");
}

#[test]
fn zero_parameters_give_zero_relevance_on_balanced_labels() {
    let ds = classification(3000, 6);
    let cfg = small_config(0.0, 1);
    let arch = cfg.arch_for(&ds).unwrap();
    let model = DvibModel::from_params(arch.clone(), vec![0.0; arch.layout().unwrap().total]).unwrap();
    let h = target_entropy(&ds).unwrap();
    let est = estimate_pair(&model, &ds, h, 10, 0).unwrap();
    assert!((est.relevance - (h - 3f64.ln())).abs() < 1e-12);
    assert!(est.relevance.abs() < 5e-3);
}

#[test]
fn exact_conditional_decoder_recovers_mutual_information() {
    let joint = toy_discrete_joint(&ToyJointSpec::Random { y: 2, views: vec![3] }, 11).unwrap();
    let n = 40_000;
    let ds = dib_core::datagen::sample_discrete(&joint, n, 12).unwrap();
    // axes (x, y), y fastest
    let p = joint.probs();
    let p_x: Vec<f64> = (0..3).map(|x| p[2 * x] + p[2 * x + 1]).collect();
    let cond = |y: usize, x: usize| p[2 * x + y] / p_x[x];

    // one-hot symbol -> its own latent coordinate, (almost) noiseless; the
    // decoder's logits for symbol x are ln p(y|x)
    let arch = DvibArch {
        view_inputs: vec![3],
        latent_dims: vec![3],
        target: TargetKind::Categorical { classes: 2 },
        encoder_hidden: vec![],
        decoder_hidden: vec![],
    };
    let layout = arch.layout().unwrap();
    let mut params = vec![0.0; layout.total];
    let enc = layout.encoder(0).layers[0];
    // output units 0..3 are means, 3..6 log-variances; weights row-major (out x in)
    for x in 0..3 {
        params[enc.weights + x * 3 + x] = 1.0;
        params[enc.biases + 3 + x] = -40.0;
    }
    let dec = layout.main_decoder().layers[0];
    for y in 0..2 {
        for x in 0..3 {
            params[dec.weights + y * 3 + x] = cond(y, x).ln();
        }
    }
    let model = DvibModel::from_params(arch, params).unwrap();
    let h = target_entropy(&ds).unwrap();
    let est = estimate_pair(&model, &ds, h, 10, 0).unwrap();

    let (symbols, labels) = match (ds.view(0), ds.targets()) {
        (ViewData::Symbols { symbols, .. }, Targets::Labels { labels, .. }) => (symbols, labels),
        _ => unreachable!(),
    };
    let plug_in = h + symbols
        .iter()
        .zip(labels)
        .map(|(&x, &y)| cond(y as usize, x as usize).ln())
        .sum::<f64>()
        / n as f64;
    assert!((est.relevance - plug_in).abs() < 1e-4, "{} vs {plug_in}", est.relevance);
    let exact = joint.mutual_information(&[0], &[1]).unwrap();
    assert!((est.relevance - exact).abs() < 0.01, "{} vs {exact}", est.relevance);
}

fn deterministic_encoder(model: &mut DvibModel) {
    let layout = model.layout().clone();
    for k in 0..model.arch().num_views() {
        let net = layout.encoder(k);
        let last = *net.layers.last().unwrap();
        let d = model.arch().latent_dims[k];
        for o in d..2 * d {
            for q in 0..last.inputs {
                model.params_mut()[last.weights + o * last.inputs + q] = 0.0;
            }
            model.params_mut()[last.biases + o] = -1e3;
        }
    }
}

#[test]
fn predictions_one_shot_and_averaged() {
    let (ds, test) = classification(5000, 7).split(3000).unwrap();
    let (mut model, _) = train(&ds, None, &small_config(0.01, 10)).unwrap();
    let one = predict(&model, &test, PredictMode::OneShot, 1).unwrap();
    let avg = predict(&model, &test, PredictMode::Averaged { draws: 10 }, 1).unwrap();
    let (a1, a10) = (one.accuracy(&test).unwrap(), avg.accuracy(&test).unwrap());
    assert!(a10 >= a1 - 0.005, "{a10} vs {a1}");
    assert!(a10 > 0.6, "{a10}");
    assert!(one.mean_squared_error(&test).is_none());

    deterministic_encoder(&mut model);
    let one = predict(&model, &test, PredictMode::OneShot, 3).unwrap();
    let avg = predict(&model, &test, PredictMode::Averaged { draws: 10 }, 4).unwrap();
    match (one, avg) {
        (Prediction::Labels { labels: l1, probs: p1 }, Prediction::Labels { labels: l2, probs: p2 }) => {
            assert_eq!(l1, l2);
            // the log-variance clamp leaves a latent spread of exp(-7.5)
            assert!((p1 - p2).amax() < 1e-2);
        }
        _ => unreachable!(),
    }
}

#[test]
fn untrained_models_predict_at_chance_on_average() {
    let test = classification(3000, 9);
    let cfg = small_config(0.01, 1);
    let arch = cfg.arch_for(&test).unwrap();
    let inits = 20;
    let mean_acc = (0..inits)
        .map(|seed| {
            let model = DvibModel::init(arch.clone(), &mut SeededRng::new(seed)).unwrap();
            predict(&model, &test, PredictMode::Averaged { draws: 10 }, 0).unwrap().accuracy(&test).unwrap()
        })
        .sum::<f64>()
        / inits as f64;
    assert!((mean_acc - 1.0 / 3.0).abs() < 0.06, "{mean_acc}");
}

#[test]
fn regression_predictions_and_mse() {
    let model = dib_core::datagen::random_model(1, &[2, 2], 3).unwrap();
    let ds = dib_core::datagen::sample_gaussian(&model, 3000, 4).unwrap();
    let (net, trace) = train(&ds, None, &small_config(0.001, 10)).unwrap();
    let pred = predict(&net, &ds, PredictMode::Averaged { draws: 10 }, 0).unwrap();
    let mse = pred.mean_squared_error(&ds).unwrap();
    // Gaussian conditional variance is exp(-2 I(Y;X)) Var(Y) for scalar Y
    let best = (-2.0 * model.relevance_limit(FieldFactor::Real)).exp() * model.sigma_y()[(0, 0)];
    assert!(mse > 0.9 * best && mse < 2.0 * best, "{mse} vs {best}");
    assert!(trace.target_entropy_train == ds.meta().target_entropy.unwrap());
}

#[test]
fn config_validation_and_schedule() {
    let c = TrainConfig::default();
    assert_eq!(c.learning_rate(0), 1e-3);
    assert_eq!(c.learning_rate(29), 1e-3);
    assert_eq!(c.learning_rate(30), 5e-4);
    assert_eq!(c.learning_rate(149), 1e-3 * 0.5f64.powi(4));
    assert!(TrainConfig { mc_train: 0, ..c.clone() }.validate().is_err());
    assert!(TrainConfig { s: -1.0, ..c.clone() }.validate().is_err());
    assert!(TrainConfig { minibatch: 0, ..c.clone() }.validate().is_err());
    let ds = classification(10, 0);
    assert!(TrainConfig { latent_dims: vec![1, 2, 3], ..c }.arch_for(&ds).is_err());
}

#[test]
fn divergence_surfaces_as_a_training_error() {
    let ds = MultiviewDataset::new(
        vec![ViewData::Real {
            dim: 1,
            values: vec![1e200, -1e200, 3.0, 0.5],
        }],
        Targets::Real {
            dim: 1,
            values: vec![1e300, -1e300, 0.0, 1.0],
        },
        DatasetMeta {
            generator: "t".into(),
            seed: 0,
            field: FieldFactor::Real,
            target_entropy: Some(1.0),
            model: None,
        },
    )
    .unwrap();
    let err = train(&ds, None, &small_config(0.1, 2)).unwrap_err();
    assert!(matches!(err, dib_core::DibError::Training(_)), "{err}");
}

use dib_core::datagen::random_model;
use dib_core::gauss_dib::*;
use dib_core::info::{FieldFactor, LinearGaussianModel};
use dib_core::rng::SeededRng;
use nalgebra::DMatrix;
use proptest::prelude::*;

const REAL: FieldFactor = FieldFactor::Real;

fn scalar_curve(r: f64) -> f64 {
    -0.5 * (1.0 - 0.5 * (1.0 - (-2.0 * r).exp())).ln()
}

#[test]
fn scalar_curve_from_a_fine_grid_over_omega() {
    // direct 1-D search of max_w min{a(w), R + b(w)} at resolution 1e-6
    let r = std::f64::consts::LN_2;
    let mut best = f64::NEG_INFINITY;
    let mut best_w = 0.0;
    for i in 0..1_000_000 {
        let w = i as f64 * 1e-6;
        let v = (0.5 * (1.0 + w).ln()).min(r + 0.5 * (1.0 - w).ln());
        if v > best {
            best = v;
            best_w = w;
        }
    }
    assert!((best_w - 0.6).abs() < 2e-6);
    let bp = boundary_at_rate(&LinearGaussianModel::scalar(&[1.0]).unwrap(), r, REAL).unwrap();
    assert!((bp.point.relevance - best).abs() < 1e-6);
    assert!((bp.point.relevance - scalar_curve(r)).abs() < 1e-10);
}

#[test]
fn scalar_ba_follows_closed_form() {
    let m = LinearGaussianModel::scalar(&[1.0]).unwrap();
    for i in 1..=19 {
        let s = 0.05 * i as f64;
        let sol = ba_gauss_solve(&m, &GaussBaConfig::with_s(s), REAL).unwrap();
        assert!(sol.trace.converged);
        let p = sol.point;
        assert!((p.relevance - scalar_curve(p.sum_complexity)).abs() < 1e-6, "s = {s}");
    }
}

#[test]
fn fig3_shape_points_lie_on_the_boundary() {
    let m = random_model(1, &[3, 3], 0).unwrap();
    for s in [0.05, 0.2, 0.5, 1.0, 3.0] {
        let sol = ba_gauss_solve(&m, &GaussBaConfig::with_s(s), REAL).unwrap();
        let r = sol.point.sum_complexity;
        let bound = boundary_at_rate(&m, r, REAL).unwrap().point.relevance;
        assert!(sol.point.relevance <= bound + 1e-8);
        assert!(bound - sol.point.relevance < 1e-3, "s = {s}");
        if r > 1e-6 {
            assert!(sol.point.relevance < cib_bound(&m, r, REAL).unwrap());
        }
    }
}

#[test]
fn ba_fixed_points_match_tangent_points() {
    let m = random_model(2, &[3, 3], 1).unwrap();
    for s in [0.1, 0.4] {
        let sol = ba_gauss_solve(&m, &GaussBaConfig::with_s(s), REAL).unwrap();
        let tangent = boundary_at_s(&m, s, REAL).unwrap().point;
        assert!((sol.point.relevance - tangent.relevance).abs() < 1e-6);
        assert!((sol.point.sum_complexity - tangent.sum_complexity).abs() < 1e-5);
    }
}

fn random_encoders(m: &LinearGaussianModel, rng: &mut SeededRng) -> GaussianEncoderSet {
    let dims = m.view_dims();
    let a = dims
        .iter()
        .map(|&n| DMatrix::from_fn(n, n, |_, _| rng.normal()))
        .collect();
    let z = dims
        .iter()
        .map(|&n| {
            let b = DMatrix::from_fn(n, n, |_, _| rng.normal());
            &b * b.transpose() + DMatrix::identity(n, n) * 0.1
        })
        .collect();
    GaussianEncoderSet::new(a, z).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn boundary_is_monotone_concave_and_dominated(seed in 0u64..10_000, ny in 1usize..3) {
        let m = random_model(ny, &[2, 3], seed).unwrap();
        let rates: Vec<f64> = (0..25).map(|i| 0.15 * i as f64).collect();
        let d = sum_boundary_at_rates(&m, &rates, REAL).unwrap();
        let c = cib_curve(&m, &rates, REAL).unwrap();
        for (p, q) in d.iter().zip(&c) {
            prop_assert!(q.relevance - p.relevance >= -1e-8);
            prop_assert!(p.relevance <= m.relevance_limit(REAL) + 1e-10);
        }
        for w in d.windows(2) {
            prop_assert!(w[1].relevance >= w[0].relevance - 1e-10);
        }
        for w in d.windows(3) {
            prop_assert!(w[2].relevance - 2.0 * w[1].relevance + w[0].relevance <= 1e-6);
        }
    }

    #[test]
    fn arbitrary_encoders_stay_below_the_bounds(seed in 0u64..10_000) {
        let m = random_model(1, &[2, 2], seed).unwrap();
        let mut rng = SeededRng::new(seed);
        let enc = random_encoders(&m, &mut rng);
        let pair = evaluate_gauss_pair(&m, &enc, REAL).unwrap();
        let r = pair.sum_complexity;
        prop_assert!(pair.relevance <= boundary_at_rate(&m, r, REAL).unwrap().point.relevance + 1e-8);
        prop_assert!(pair.relevance <= cib_bound(&m, r, REAL).unwrap() + 1e-8);
    }

    #[test]
    fn sweeps_never_descend(seed in 0u64..10_000, s in 0.05f64..3.0) {
        let m = random_model(1, &[2, 2], seed).unwrap();
        let cfg = GaussBaConfig { max_iter: 200, ..GaussBaConfig::with_s(s) };
        let mut rng = SeededRng::new(seed);
        let (_, trace) = ba_gauss_run(&m, GaussianEncoderSet::random(&m, &mut rng), &cfg, REAL).unwrap();
        prop_assert!(trace.worst_descent() <= 1e-7);
        prop_assert!(trace.records.iter().all(|r| r.min_noise_eigenvalue >= -1e-10));
    }

    #[test]
    fn field_factor_scales_pairs(seed in 0u64..10_000) {
        let m = random_model(2, &[2, 2], seed).unwrap();
        let mut rng = SeededRng::new(seed);
        let enc = random_encoders(&m, &mut rng);
        let r = evaluate_gauss_pair(&m, &enc, FieldFactor::Real).unwrap();
        let c = evaluate_gauss_pair(&m, &enc, FieldFactor::Complex).unwrap();
        prop_assert!((2.0 * r.relevance - c.relevance).abs() < 1e-10);
        prop_assert!((2.0 * r.sum_complexity - c.sum_complexity).abs() < 1e-10);
    }
}

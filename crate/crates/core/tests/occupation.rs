use approx::assert_relative_eq;
use melevy_core::catalog;
use melevy_core::numeric::linear_grid;
use melevy_core::occupation::{
    hyperexp_occupation, ladder_exponent, ladder_exponent_closed_form, occupation_identity_residual,
    occupation_limit, occupation_mgf, sojourn_identity_residual, stepwise_occupation, OccupationTransform,
};
use melevy_core::{Jumps, LevyModel, MeJumpSpec, Side};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn exp_root(s: f64) -> f64 {
    (-s + (s * s + 4.0 * s).sqrt()) / 2.0
}

#[test]
fn time_above_zero_for_the_exponential_example() {
    let m = catalog::drift_exp();
    let d0 = occupation_mgf(&m, 1.0, 1.0, 0.0).unwrap();
    let oracle = 0.5 * exp_root(2.0) / exp_root(1.0);
    assert!((d0 - oracle).abs() < 1e-12);
    for (s, u) in [(0.3, 2.0), (2.0, 0.5), (5.0, 5.0)] {
        let oracle = s / (s + u) * exp_root(s + u) / exp_root(s);
        assert_relative_eq!(occupation_mgf(&m, s, u, 0.0).unwrap(), oracle, max_relative = 1e-12);
    }
}

fn second_hyperexp_model() -> LevyModel {
    let neg = Jumps::Me(MeJumpSpec::hyperexponential(Side::Negative, 1.5, &[0.3, 0.7], &[0.8, 2.5]).unwrap());
    let pos = Jumps::Me(MeJumpSpec::hyperexponential(Side::Positive, 0.7, &[0.5, 0.5], &[1.5, 4.0]).unwrap());
    LevyModel::new(-0.1, 0.6, neg, pos).unwrap()
}

#[test]
fn matrix_and_partial_fraction_routes_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for m in [catalog::hyperexp_diffusion(), second_hyperexp_model()] {
        for _ in 0..50 {
            let s = rng.random_range(0.05..5.0);
            let u = rng.random_range(0.05..5.0);
            let x = rng.random_range(-4.0..4.0);
            let a = occupation_mgf(&m, s, u, x).unwrap();
            let b = hyperexp_occupation(&m, s, u, x).unwrap();
            assert!((a - b).abs() < 1e-9, "s={s} u={u} x={x}: {a} vs {b}");
        }
    }
}

#[test]
fn occupation_transform_is_monotone_with_the_right_ends() {
    for name in ["bm", "drift_exp", "hyperexp_cp", "hyperexp_diffusion", "neg_me_complex"] {
        let m = catalog::builtin(name).unwrap();
        let (s, u) = (0.8, 1.7);
        let occ = OccupationTransform::new(&m, s, u).unwrap();
        let xs = linear_grid(-30.0, 30.0, 121);
        let vals: Vec<f64> = xs.iter().map(|&x| occ.value(x).unwrap()).collect();
        for w in vals.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "{name}");
        }
        assert!((vals[0] - s / (s + u)).abs() < 1e-8, "{name}: {}", vals[0]);
        assert!((vals[vals.len() - 1] - 1.0).abs() < 1e-8, "{name}");
    }
}

fn negative_mean_models() -> Vec<LevyModel> {
    let neg = Jumps::Me(MeJumpSpec::hyperexponential(Side::Negative, 1.0, &[0.4, 0.6], &[1.0, 3.0]).unwrap());
    let pos = Jumps::Me(MeJumpSpec::exponential(Side::Positive, 0.6, 2.0).unwrap());
    vec![
        catalog::drift_erlang2(),
        LevyModel::new(0.1, 0.4, neg.clone(), pos.clone()).unwrap(),
        second_hyperexp_model(),
    ]
}

#[test]
fn small_killing_rate_matches_total_sojourn() {
    for m in negative_mean_models() {
        assert!(m.mean().unwrap() < 0.0);
        for x in linear_grid(-3.0, 3.0, 20) {
            let a = occupation_mgf(&m, 1e-6, 1.3, x).unwrap();
            let b = occupation_limit(&m, 1.3, x).unwrap();
            assert!((a / b - 1.0).abs() < 1e-4, "x={x}: {a} vs {b}");
        }
    }
}

#[test]
fn total_sojourn_vanishes_for_positive_mean() {
    let m = catalog::hyperexp_cp().mirrored();
    if m.mean().unwrap() > 0.0 {
        assert_eq!(occupation_limit(&m, 1.0, 0.5).unwrap(), 0.0);
    }
}

#[test]
fn stepwise_route_matches_the_matrix_route() {
    let neg = Jumps::Me(MeJumpSpec::hyperexponential(Side::Negative, 1.0, &[0.4, 0.6], &[1.0, 3.0]).unwrap());
    let pos = Jumps::Me(MeJumpSpec::hyperexponential(Side::Positive, 0.8, &[0.5, 0.5], &[2.0, 5.0]).unwrap());
    let m = LevyModel::new(-0.1, 0.0, neg, pos).unwrap();
    for s in [0.0, 0.4, 2.0] {
        for x in [0.05, 0.6, 2.0] {
            let a = stepwise_occupation(&m, s, 0.9, x).unwrap();
            let b = if s == 0.0 {
                occupation_limit(&m, 0.9, x).unwrap()
            } else {
                occupation_mgf(&m, s, 0.9, x).unwrap()
            };
            assert!((a - b).abs() < 1e-8, "s={s} x={x}: {a} vs {b}");
        }
    }
}

#[test]
fn occupation_identities_hold() {
    for m in [catalog::hyperexp_diffusion(), catalog::brownian(), catalog::neg_me_complex()] {
        for r in [0.2, 0.7] {
            let res = occupation_identity_residual(&m, 0.9, 1.1, Complex64::new(r, 0.0)).unwrap();
            assert!(res < 1e-8, "{res:e}");
        }
    }
    for m in negative_mean_models() {
        let res = sojourn_identity_residual(&m, 1.2, Complex64::new(-0.3, 0.0)).unwrap();
        assert!(res < 1e-8, "{res:e}");
    }
}

#[test]
fn ladder_exponent_routes_agree() {
    for name in ["drift_exp", "hyperexp_diffusion", "neg_me_complex"] {
        let m = catalog::builtin(name).unwrap();
        for s in [0.2, 0.6] {
            for r in [0.0, 0.4, 1.5] {
                let r = Complex64::new(r, 0.0);
                let a = ladder_exponent(&m, s, r).unwrap();
                let b = ladder_exponent_closed_form(&m, s, r).unwrap();
                assert!((a - b).norm() < 1e-9 * (1.0 + a.norm()), "{name} s={s}: {a} vs {b}");
            }
        }
    }
    assert!(ladder_exponent(&catalog::drift_exp(), 1.5, Complex64::new(0.0, 0.0)).is_err());
}

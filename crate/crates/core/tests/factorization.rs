use approx::assert_relative_eq;
use melevy_core::catalog::{self, CATALOG};
use melevy_core::factorization::{
    absolute_extremum, build_component, limit_component, matrix_tail_transform, opposite_extremum,
    wiener_hopf_residual, wiener_hopf_residual_components, ExtremumLaw, TailRoute,
};
use melevy_core::numeric::linear_grid;
use melevy_core::quad::{integrate_to_inf, Tolerance};
use melevy_core::{solve_roots, Jumps, LevyModel, MeJumpSpec, Side};
use num_complex::Complex64;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[test]
fn wiener_hopf_identity_on_the_imaginary_axis() {
    for entry in CATALOG {
        let m = entry.model();
        for s in [0.3, 1.0, 3.0] {
            let worst = linear_grid(0.1, 50.0, 120)
                .into_iter()
                .map(|w| wiener_hopf_residual(&m, s, Complex64::new(0.0, w)).unwrap())
                .fold(0.0, f64::max);
            assert!(worst < 1e-8, "{} s={s}: residual {worst:e}", entry.name);
        }
    }
}

#[test]
fn both_matrix_components_factorize_when_both_sides_are_me() {
    for entry in CATALOG {
        let m = entry.model();
        if !(m.neg_jumps().is_me_or_none() && m.pos_jumps().is_me_or_none()) {
            continue;
        }
        for w in linear_grid(0.1, 50.0, 60) {
            let res = wiener_hopf_residual_components(&m, 1.0, Complex64::new(0.3, w)).unwrap();
            assert!(res < 1e-9, "{}: {res:e}", entry.name);
        }
    }
}

#[test]
fn killed_components_are_normalized() {
    for entry in CATALOG {
        let m = entry.model();
        for side in [Side::Negative, Side::Positive] {
            if !m.jumps(side).is_me_or_none() {
                continue;
            }
            for s in [0.1, 1.0, 5.0] {
                let comp = build_component(&m, s, side).unwrap();
                let total = comp.atom() + comp.density_mass().unwrap();
                assert!((total - 1.0).abs() < 1e-8, "{} {side} s={s}: {total}", entry.name);
                assert_eq!(comp.mgf(c(0.0)).unwrap(), c(1.0));
            }
        }
    }
}

#[test]
fn matrix_mgf_matches_product_form() {
    for entry in CATALOG {
        let m = entry.model();
        for side in [Side::Negative, Side::Positive] {
            let Jumps::Me(spec) = m.jumps(side) else { continue };
            let comp = build_component(&m, 0.7, side).unwrap();
            for w in [0.3, 2.0, 9.0] {
                let r = Complex64::new(0.0, w);
                let a = comp.mgf(r).unwrap();
                let b = comp.mgf_product(r, spec.rates()).unwrap();
                assert!((a - b).norm() < 1e-10, "{} {side}", entry.name);
            }
        }
    }
}

#[test]
fn spectrally_negative_supremum_is_exponential() {
    let m = catalog::drift_exp();
    for s in [0.2, 1.0, 2.5] {
        let r1 = solve_roots(&m, s, Side::Positive).unwrap().first().unwrap();
        let law = opposite_extremum(&m, s, Side::Positive).unwrap();
        for r in linear_grid(-5.0, 0.9 * r1, 25) {
            let expected = r1 / (r1 - r);
            assert!((law.mgf(c(r)).unwrap().re - expected).abs() < 1e-9);
        }
        let comp = build_component(&m, s, Side::Positive).unwrap();
        for x in [0.1, 1.0, 3.0] {
            assert_relative_eq!(comp.cdf(x).unwrap(), 1.0 - (-r1 * x).exp(), epsilon = 1e-12);
        }
        assert_eq!(law.atom(), 0.0);
    }
}

#[test]
fn single_exponential_negative_jumps_reduce_to_one_term() {
    let m = catalog::drift_exp();
    for s in [0.1, 1.0, 7.0] {
        let comp = build_component(&m, s, Side::Negative).unwrap();
        let r1 = comp.roots()[0].re;
        let b1 = 1.0;
        for x in linear_grid(-6.0, -0.01, 15) {
            let expected = r1 / b1 * (b1 - r1) * (r1 * x).exp();
            assert_relative_eq!(comp.density(x), expected, epsilon = 1e-12, max_relative = 1e-12);
        }
    }
}

#[test]
fn eigen_and_quadrature_tail_transforms_agree() {
    for entry in CATALOG {
        let m = entry.model();
        if !m.neg_jumps().is_me_or_none() {
            continue;
        }
        let comp = build_component(&m, 1.3, Side::Negative).unwrap();
        let a = matrix_tail_transform(m.pos_jumps(), &comp, TailRoute::Eigen);
        let b = matrix_tail_transform(m.pos_jumps(), &comp, TailRoute::Quadrature).unwrap();
        let Ok(a) = a else { continue };
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-9 * (1.0 + y.abs()), "{}: {x} vs {y}", entry.name);
        }
    }
}

#[test]
fn transform_route_matches_matrix_route() {
    let m = catalog::hyperexp_diffusion();
    let exact = build_component(&m, 1.0, Side::Positive).unwrap();
    let inverted = opposite_extremum(&m, 1.0, Side::Positive).unwrap();
    for r in [-2.0, -0.5, 0.3] {
        assert!((exact.mgf(c(r)).unwrap() - inverted.mgf(c(r)).unwrap()).norm() < 1e-10);
    }
    for x in [0.2, 1.0, 2.5] {
        assert!((exact.cdf(x).unwrap() - inverted.cdf(x)).abs() < 1e-7);
        assert!((exact.density(x) - inverted.density(x)).abs() < 1e-6);
    }
}

#[test]
fn inverted_extremum_law_is_normalized() {
    let m = catalog::exp_general_pos();
    let law = ExtremumLaw::killed(&m, 1.0, Side::Positive).unwrap();
    assert!(!law.is_exact());
    let mass = integrate_to_inf(|x| law.density(x), 0.0, 0.5, Tolerance::new(1e-11, 1e-10)).unwrap();
    assert!((law.atom() + mass - 1.0).abs() < 1e-7, "{}", law.atom() + mass);
    assert_eq!(law.mgf(c(0.0)).unwrap(), c(1.0));
}

fn negative_mean_models() -> Vec<LevyModel> {
    let neg = Jumps::Me(MeJumpSpec::hyperexponential(Side::Negative, 1.0, &[0.4, 0.6], &[1.0, 3.0]).unwrap());
    let pos = Jumps::Me(MeJumpSpec::exponential(Side::Positive, 0.6, 2.0).unwrap());
    vec![
        catalog::drift_erlang2(),
        LevyModel::new(0.1, 0.4, neg.clone(), pos.clone()).unwrap(),
        LevyModel::new(-0.2, 0.0, neg, pos).unwrap(),
    ]
}

#[test]
fn scaled_killed_density_converges_to_the_limit_component() {
    let s = 1e-6;
    for m in negative_mean_models() {
        assert!(m.mean().unwrap() < 0.0);
        let killed = build_component(&m, s, Side::Negative).unwrap();
        let limit = limit_component(&m).unwrap();
        for x in linear_grid(-6.0, -0.05, 20) {
            let a = killed.density(x) / s;
            let b = limit.density(x);
            assert!((a / b - 1.0).abs() < 1e-4, "x={x}: {a} vs {b}");
        }
    }
}

#[test]
fn absolute_supremum_matches_small_s_killed_supremum() {
    for m in negative_mean_models() {
        let abs = absolute_extremum(&m).unwrap();
        assert_eq!(abs.side, Side::Positive);
        let killed = ExtremumLaw::killed(&m, 1e-7, Side::Positive).unwrap();
        for x in [0.1, 1.0, 4.0] {
            assert!((abs.law.cdf(x).unwrap() - killed.cdf(x).unwrap()).abs() < 1e-5);
        }
        assert_relative_eq!(abs.law.cdf(200.0).unwrap(), 1.0, epsilon = 1e-8);
    }
}

#[test]
fn mirrored_model_swaps_the_extrema() {
    let m = catalog::hyperexp_cp();
    let d = m.mirrored();
    let a = build_component(&m, 0.9, Side::Positive).unwrap();
    let b = build_component(&d, 0.9, Side::Negative).unwrap();
    for x in [0.3, 1.2] {
        assert_relative_eq!(a.density(x), b.density(-x), max_relative = 1e-11);
    }
    assert_relative_eq!(a.atom(), b.atom(), max_relative = 1e-12);
}

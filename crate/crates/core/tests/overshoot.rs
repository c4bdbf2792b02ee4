use approx::assert_relative_eq;
use melevy_core::catalog::{self, CATALOG};
use melevy_core::numeric::linear_grid;
use melevy_core::overshoot::{discounted_overshoot, overshoot_limit, triple_law};
use melevy_core::quad::{integrate, integrate_to_inf, Tolerance};
use melevy_core::{Jumps, LevyModel, MeJumpSpec, Side};

fn tol() -> Tolerance {
    Tolerance::new(1e-12, 1e-10)
}

#[test]
fn overshoot_mass_balances_against_the_supremum_tail() {
    for entry in CATALOG {
        let m = entry.model();
        for s in [0.5, 2.0] {
            for x in [0.2, 1.0, 2.5] {
                let law = discounted_overshoot(&m, s, x).unwrap();
                let lhs = law.atom() + law.continuous_mass();
                assert!((lhs - law.total_mass()).abs() < 1e-8, "{} s={s} x={x}: {lhs} vs {}", entry.name, law.total_mass());
            }
        }
    }
}

#[test]
fn overshoot_density_integrates_to_the_continuous_mass() {
    for name in ["hyperexp_cp", "hyperexp_diffusion"] {
        let m = catalog::builtin(name).unwrap();
        let law = discounted_overshoot(&m, 1.0, 0.8).unwrap();
        let mass = integrate_to_inf(|v| law.density(v).unwrap(), 0.0, 0.5, tol()).unwrap();
        assert_relative_eq!(mass, law.continuous_mass(), max_relative = 1e-8);
        let binned = law.interval_mass(0.0, 0.4).unwrap() + law.interval_mass(0.4, f64::INFINITY).unwrap();
        assert_relative_eq!(binned, law.continuous_mass(), max_relative = 1e-10);
    }
}

#[test]
fn triple_law_marginalizes_to_the_overshoot_density() {
    for name in ["hyperexp_cp", "hyperexp_diffusion"] {
        let m = catalog::builtin(name).unwrap();
        let (s, x) = (1.0, 0.9);
        let t = triple_law(&m, s, x).unwrap();
        let law = discounted_overshoot(&m, s, x).unwrap();
        for v in [0.1, 0.7] {
            let bulk = integrate(
                |y| integrate_to_inf(|w| t.density(y, y + w, v).unwrap(), 0.0, 0.5, tol()).unwrap(),
                0.0,
                x,
                tol(),
            )
            .unwrap();
            let at_level = integrate_to_inf(|w| t.density_at_level(x + w, v).unwrap(), 0.0, 0.5, tol()).unwrap();
            let at_max = integrate(|y| t.density_at_max(y, v).unwrap(), 0.0, x, tol()).unwrap();
            let total = bulk + at_level + at_max + t.density_corner(v).unwrap();
            assert_relative_eq!(total, law.density(v).unwrap(), max_relative = 1e-7);
        }
    }
}

fn negative_mean_models() -> Vec<LevyModel> {
    let neg = Jumps::Me(MeJumpSpec::hyperexponential(Side::Negative, 1.0, &[0.4, 0.6], &[1.0, 3.0]).unwrap());
    let pos = Jumps::Me(MeJumpSpec::exponential(Side::Positive, 0.6, 2.0).unwrap());
    vec![
        LevyModel::new(0.1, 0.4, neg.clone(), pos.clone()).unwrap(),
        LevyModel::new(-0.2, 0.0, neg, pos).unwrap(),
    ]
}

#[test]
fn small_discount_overshoot_matches_the_limit_law() {
    for m in negative_mean_models() {
        for x in linear_grid(0.1, 4.0, 20) {
            let killed = discounted_overshoot(&m, 1e-6, x).unwrap();
            let limit = overshoot_limit(&m, x).unwrap();
            assert!((killed.total_mass() / limit.total_mass() - 1.0).abs() < 1e-4);
            assert!((killed.density(0.5).unwrap() / limit.density(0.5).unwrap() - 1.0).abs() < 1e-4);
            if limit.atom() > 0.0 {
                assert!((killed.atom() / limit.atom() - 1.0).abs() < 1e-4);
            }
        }
    }
}

#[test]
fn limit_law_requires_negative_mean() {
    assert!(overshoot_limit(&catalog::hyperexp_diffusion().mirrored().mirrored(), 1.0).is_ok() == (catalog::hyperexp_diffusion().mean().unwrap() < 0.0));
    assert!(discounted_overshoot(&catalog::drift_exp(), 0.0, 1.0).is_err());
    assert!(discounted_overshoot(&catalog::drift_exp(), 1.0, -1.0).is_err());
}

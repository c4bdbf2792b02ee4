use melevy_core::catalog::CATALOG;
use melevy_core::{limiting_roots, solve_roots, Case, Jumps, Side};
use num_complex::Complex64;

fn smallest_rate(jumps: &Jumps) -> Option<f64> {
    jumps.as_me().map(|s| s.rates().iter().map(|b| b.re).fold(f64::INFINITY, f64::min))
}

#[test]
fn roots_solve_the_cumulant_equation() {
    for entry in CATALOG {
        let m = entry.model();
        for s in [0.05, 0.5, 1.0, 4.0] {
            for side in [Side::Negative, Side::Positive] {
                if !m.jumps(side).is_me_or_none() {
                    continue;
                }
                let set = solve_roots(&m, s, side).unwrap();
                for r in &set.roots {
                    assert!(r.re > 0.0, "{}: root {r} not in the right half-plane", entry.name);
                    let k = m.cumulant_unchecked(side.sign() * r);
                    assert!((k - s).norm() < 1e-9 * (1.0 + s), "{} s={s} {side}: |k(r)-s| = {}", entry.name, (k - s).norm());
                }
            }
        }
    }
}

#[test]
fn root_counts_follow_the_case() {
    for entry in CATALOG {
        let m = entry.model();
        for side in [Side::Negative, Side::Positive] {
            let d = match m.jumps(side) {
                Jumps::None => 0,
                Jumps::Me(spec) => spec.degree(),
                Jumps::General(_) => continue,
            };
            let expected = match m.case(side) {
                Case::Stepwise => d,
                _ => d + 1,
            };
            let set = solve_roots(&m, 1.0, side).unwrap();
            assert_eq!(set.count(), expected, "{} {side}", entry.name);
        }
    }
}

#[test]
fn first_root_lies_below_the_smallest_rate() {
    for entry in CATALOG {
        let m = entry.model();
        for side in [Side::Negative, Side::Positive] {
            let Some(b1) = smallest_rate(m.jumps(side)) else { continue };
            for s in [0.01, 1.0, 10.0] {
                let r1 = solve_roots(&m, s, side).unwrap().first().unwrap();
                assert!((0.0..=b1).contains(&r1), "{} {side} s={s}: r1 = {r1}, b1 = {b1}", entry.name);
            }
        }
    }
}

#[test]
fn quadratic_roots_of_the_exponential_example() {
    let m = melevy_core::catalog::drift_exp();
    // k(-r) = s reduces to r^2 + s r - s = 0
    let set = solve_roots(&m, 1.0, Side::Negative).unwrap();
    assert_eq!(set.count(), 1);
    assert!((set.roots[0] - Complex64::new((5f64.sqrt() - 1.0) / 2.0, 0.0)).norm() < 1e-12);
    let pos = solve_roots(&m, 1.0, Side::Positive).unwrap();
    assert!((pos.roots[0].re - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
}

#[test]
fn limiting_roots_insert_zero_on_the_vanishing_side() {
    let m = melevy_core::catalog::drift_erlang2();
    let mu = m.mean().unwrap();
    assert!(mu < 0.0);
    let lim = limiting_roots(&m, Side::Negative).unwrap();
    assert!(lim.vanishing);
    assert_eq!(lim.roots[0], Complex64::new(0.0, 0.0));
    assert!((lim.slope.unwrap() - 1.0 / mu.abs()).abs() < 1e-12);
    let s = 1e-7;
    let r1 = solve_roots(&m, s, Side::Negative).unwrap().first().unwrap();
    assert!((r1 / s - 1.0 / mu.abs()).abs() < 1e-5);
    assert!(!limiting_roots(&m, Side::Positive).unwrap().vanishing);
}

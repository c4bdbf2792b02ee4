//! Example models used by the tests, benchmarks and the command-line tool.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{GeneralJumpSpec, Jumps, LevyModel, MeJumpSpec, Side};

/// A named example model.
#[derive(Debug, Clone, Copy)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    build: fn() -> LevyModel,
}

impl CatalogEntry {
    pub fn model(&self) -> LevyModel {
        (self.build)()
    }
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "bm",
        description: "Brownian motion, a = 0, sigma = sqrt(2)",
        build: brownian,
    },
    CatalogEntry {
        name: "drift_exp",
        description: "a = 1, sigma = 0, negative Exp(1) jumps with intensity 1",
        build: drift_exp,
    },
    CatalogEntry {
        name: "drift_erlang2",
        description: "a = 1.5, sigma = 0, negative Erlang(2, 2) jumps with intensity 2",
        build: drift_erlang2,
    },
    CatalogEntry {
        name: "hyperexp_cp",
        description: "compound Poisson with drift 0.1 and hyperexponential jumps on both sides",
        build: hyperexp_cp,
    },
    CatalogEntry {
        name: "hyperexp_diffusion",
        description: "hyperexponential jumps on both sides with drift 0.1 and sigma = 0.5",
        build: hyperexp_diffusion,
    },
    CatalogEntry {
        name: "neg_me_complex",
        description: "negative jumps with density prop. to e^{-x}(1 - cos 2 pi x), a = 1, sigma = 0.3",
        build: neg_me_complex,
    },
    CatalogEntry {
        name: "exp_general_pos",
        description: "negative Exp(1) jumps, positive Uniform(0, 1) jumps given by their transform, sigma = 0.5",
        build: exp_general_pos,
    },
];

/// Looks up a catalog model by name.
pub fn builtin(name: &str) -> Result<LevyModel> {
    CATALOG
        .iter()
        .find(|e| e.name == name)
        .map(CatalogEntry::model)
        .ok_or_else(|| {
            let names: Vec<&str> = CATALOG.iter().map(|e| e.name).collect();
            Error::InvalidModel(format!("unknown builtin model '{name}' (known: {})", names.join(", ")))
        })
}

pub fn brownian() -> LevyModel {
    LevyModel::new(0.0, 2f64.sqrt(), Jumps::None, Jumps::None).expect("valid model")
}

pub fn drift_exp() -> LevyModel {
    let neg = MeJumpSpec::exponential(Side::Negative, 1.0, 1.0).expect("valid spec");
    LevyModel::new(1.0, 0.0, Jumps::Me(neg), Jumps::None).expect("valid model")
}

pub fn drift_erlang2() -> LevyModel {
    let neg = MeJumpSpec::erlang(Side::Negative, 2.0, 2, 2.0).expect("valid spec");
    LevyModel::new(1.5, 0.0, Jumps::Me(neg), Jumps::None).expect("valid model")
}

fn hyperexp_sides() -> (Jumps, Jumps) {
    let neg = MeJumpSpec::hyperexponential(Side::Negative, 1.0, &[0.5, 0.5], &[1.0, 3.0]).expect("valid spec");
    let pos = MeJumpSpec::hyperexponential(Side::Positive, 0.8, &[0.5, 0.5], &[2.0, 5.0]).expect("valid spec");
    (Jumps::Me(neg), Jumps::Me(pos))
}

pub fn hyperexp_cp() -> LevyModel {
    let (neg, pos) = hyperexp_sides();
    LevyModel::new(0.1, 0.0, neg, pos).expect("valid model")
}

pub fn hyperexp_diffusion() -> LevyModel {
    let (neg, pos) = hyperexp_sides();
    LevyModel::new(0.1, 0.5, neg, pos).expect("valid model")
}

/// Jump law with density `(1 + 4 pi^2) / (4 pi^2) e^{-x} (1 - cos 2 pi x)`.
pub fn cosine_jumps(side: Side, intensity: f64) -> Result<MeJumpSpec> {
    let w = 4.0 * PI * PI;
    MeJumpSpec::new(side, intensity, &[1.0 + w, 0.0, 0.0], &[1.0 + w, 3.0 + w, 3.0])
}

pub fn neg_me_complex() -> LevyModel {
    let neg = cosine_jumps(Side::Negative, 1.0).expect("valid spec");
    LevyModel::new(1.0, 0.3, Jumps::Me(neg), Jumps::None).expect("valid model")
}

/// Positive Uniform(0, 1) jumps with the given intensity.
pub fn uniform_jumps(intensity: f64) -> Result<GeneralJumpSpec> {
    let tail = Arc::new(move |x: f64| if x <= 0.0 { intensity } else { intensity * (1.0 - x).max(0.0) });
    let transform = Arc::new(move |r: Complex64| {
        // lambda int_0^1 e^{rx} (1 - x) dx = lambda (e^r - 1 - r) / r^2
        if r.norm() < 1e-2 {
            let mut term = Complex64::new(0.5, 0.0);
            let mut sum = term;
            for k in 3..12 {
                term *= r / k as f64;
                sum += term;
            }
            intensity * sum
        } else {
            intensity * (r.exp() - 1.0 - r) / (r * r)
        }
    });
    let density = Arc::new(move |x: f64| if x > 0.0 && x < 1.0 { intensity } else { 0.0 });
    Ok(
        GeneralJumpSpec::new(Side::Positive, "uniform(0,1)", tail, transform, f64::INFINITY, 0.5)?
            .with_density(density)
            .with_second_moment(1.0 / 3.0)
            .with_breakpoints(&[1.0]),
    )
}

pub fn exp_general_pos() -> LevyModel {
    let neg = MeJumpSpec::exponential(Side::Negative, 1.0, 1.0).expect("valid spec");
    let pos = uniform_jumps(0.5).expect("valid spec");
    LevyModel::new(0.2, 0.5, Jumps::Me(neg), Jumps::General(pos)).expect("valid model")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_builds() {
        for e in CATALOG {
            let m = e.model();
            assert!(m.mean().is_some(), "{}", e.name);
        }
        assert!(builtin("nope").is_err());
    }

    #[test]
    fn uniform_transform_series_matches_closed_form() {
        let g = uniform_jumps(1.0).unwrap();
        for r in [Complex64::new(0.0099, 0.0), Complex64::new(0.0, 0.0099)] {
            let closed = (r.exp() - 1.0 - r) / (r * r);
            assert!((g.transform(r).unwrap() - closed).norm() < 1e-12);
        }
        assert!((g.transform(Complex64::new(0.0, 0.0)).unwrap().re - 0.5).abs() < 1e-15);
    }
}

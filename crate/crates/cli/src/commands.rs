//! Verb implementations.

use melevy_core::catalog::CATALOG;
use melevy_core::factorization::{
    absolute_extremum, build_component, opposite_extremum, wiener_hopf_residual, ExtremumLaw,
};
use melevy_core::occupation::{ladder_exponent, occupation_identity_residual, OccupationTransform};
use melevy_core::overshoot::{discounted_overshoot, overshoot_limit, OvershootLaw};
use melevy_core::simulate::{estimate_many, Functional, SimConfig, DEFAULT_GRID_STEPS};
use melevy_core::{limiting_roots, solve_roots, Error, Jumps, LevyModel, Side};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{load_model, ModelConfig};
use crate::format::{num, parse_grid, Csv};
use crate::*;

pub(crate) fn dispatch(cli: Cli) -> Result<Outcome, Failure> {
    if let Verb::Models = cli.verb {
        let mut csv = Csv::new(&["name", "description"]);
        for e in CATALOG {
            csv.row(&[e.name.to_string(), format!("\"{}\"", e.description)]);
        }
        return Ok(ok(csv));
    }
    let spec = cli
        .model
        .as_deref()
        .ok_or_else(|| Failure::usage("--model PATH or --model builtin:NAME is required"))?;
    let loaded = load_model(spec)?;
    let cfg = loaded.config.as_ref();
    let m = &loaded.model;
    match cli.verb {
        Verb::Roots(a) => roots(m, a.merged(file_params(cfg, "roots")?)),
        Verb::Infimum(a) => extremum(m, Side::Negative, a.merged(file_params(cfg, "infimum")?)),
        Verb::Supremum(a) => extremum(m, Side::Positive, a.merged(file_params(cfg, "supremum")?)),
        Verb::WhCheck(a) => wh_check(m, a.merged(file_params(cfg, "wh-check")?)),
        Verb::Overshoot(a) => overshoot(m, a.merged(file_params(cfg, "overshoot")?)),
        Verb::Occupation(a) => occupation(m, a.merged(file_params(cfg, "occupation")?)),
        Verb::Ladder(a) => ladder(m, a.merged(file_params(cfg, "ladder")?)),
        Verb::Simulate(a) => simulate(m, a.merged(file_params(cfg, "simulate")?)),
        Verb::Validate(a) => validate(m, a.merged(file_params(cfg, "validate")?)),
        Verb::Models => unreachable!("handled above"),
    }
}

fn file_params<T: serde::de::DeserializeOwned + Default>(cfg: Option<&ModelConfig>, verb: &str) -> Result<T, Failure> {
    match cfg.and_then(|c| c.verb_table(verb)) {
        None => Ok(T::default()),
        Some(t) => t
            .clone()
            .try_into()
            .map_err(|e| Failure::usage(format!("table [{verb}]: {e}"))),
    }
}

fn ok(csv: Csv) -> Outcome {
    Outcome {
        csv: csv.render(),
        passed: true,
    }
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T, Failure> {
    value.ok_or_else(|| Failure::usage(format!("--{flag} is required")))
}

fn rate(s: Option<f64>, flag: &str) -> Result<f64, Failure> {
    let s = required(s, flag)?;
    if !(s.is_finite() && s >= 0.0) {
        return Err(Failure::usage(format!("--{flag} must be finite and nonnegative (got {s})")));
    }
    Ok(s)
}

fn points(x: Option<f64>, grid: Option<&str>, default: Option<&str>) -> Result<Vec<f64>, Failure> {
    match (x, grid.or(default)) {
        (Some(_), Some(_)) if grid.is_some() => Err(Failure::usage("give either --x or --xgrid, not both")),
        (Some(x), _) => Ok(vec![x]),
        (None, Some(g)) => parse_grid(g).map_err(Failure::usage),
        (None, None) => Err(Failure::usage("--x or --xgrid is required")),
    }
}

/// Evaluates `f` on every point in parallel, keeping the input order.
fn sweep<T: Send>(xs: &[f64], f: impl Fn(f64) -> Result<T, Error> + Sync) -> Result<Vec<T>, Failure> {
    xs.par_iter().map(|&x| f(x)).collect::<Result<Vec<T>, Error>>().map_err(Failure::from)
}

fn roots(m: &LevyModel, a: RootsArgs) -> Result<Outcome, Failure> {
    let s = rate(a.s, "s")?;
    let mut csv = Csv::new(&["side", "re", "im", "residual"]);
    for side in [Side::Negative, Side::Positive] {
        if !m.jumps(side).is_me_or_none() {
            log::info!("the {side} jump side is not matrix-exponential; no roots listed");
            continue;
        }
        let (roots, residuals): (Vec<Complex64>, Vec<f64>) = if s > 0.0 {
            let set = solve_roots(m, s, side)?;
            (set.roots, set.residuals)
        } else {
            let lim = limiting_roots(m, side)?;
            let res = lim.roots.iter().map(|r| m.cumulant_unchecked(side.sign() * r).norm()).collect();
            (lim.roots, res)
        };
        for (r, res) in roots.iter().zip(residuals) {
            csv.row(&[side.symbol().to_string(), num(r.re), num(r.im), num(res)]);
        }
    }
    Ok(ok(csv))
}

fn extremum(m: &LevyModel, side: Side, a: ExtremumArgs) -> Result<Outcome, Failure> {
    let s = rate(a.s, "s")?;
    let xs = points(a.x, a.xgrid.as_deref(), None)?;
    let law = if s > 0.0 {
        ExtremumLaw::killed(m, s, side)?
    } else {
        let abs = absolute_extremum(m)?;
        if abs.side != side {
            return Err(Error::Precondition(format!(
                "the {side} extremum over all times is infinite for mean {}",
                abs.mean
            ))
            .into());
        }
        abs.law
    };
    let rows = sweep(&xs, |x| Ok((law.cdf(x)?, law.density(x))))?;
    let mut csv = Csv::new(&["x", "atom", "cdf", "density"]);
    for (x, (cdf, dens)) in xs.iter().zip(rows) {
        csv.row(&[num(*x), num(law.atom()), num(cdf), num(dens)]);
    }
    Ok(ok(csv))
}

fn wh_check(m: &LevyModel, a: WhCheckArgs) -> Result<Outcome, Failure> {
    let s = rate(a.s, "s")?;
    if s == 0.0 {
        return Err(Failure::usage("wh-check needs --s > 0"));
    }
    let lo = a.omega_min.unwrap_or(0.1);
    let hi = a.omega_max.unwrap_or(50.0);
    let n = a.points.unwrap_or(200);
    let tol = a.tol.unwrap_or(1e-8);
    let omegas = parse_grid(&format!("{lo}:{hi}:{n}")).map_err(Failure::usage)?;
    let residuals = sweep(&omegas, |w| wiener_hopf_residual(m, s, Complex64::new(0.0, w)))?;
    let max = residuals.iter().copied().fold(0.0, f64::max);
    let mut csv = Csv::new(&["omega", "residual", "max_residual", "tolerance"]);
    for (w, r) in omegas.iter().zip(&residuals) {
        csv.row(&[num(*w), num(*r), num(max), num(tol)]);
    }
    Ok(Outcome {
        csv: csv.render(),
        passed: max < tol,
    })
}

fn overshoot_law(m: &LevyModel, s: f64, level: f64) -> Result<OvershootLaw, Error> {
    if s > 0.0 {
        discounted_overshoot(m, s, level)
    } else {
        overshoot_limit(m, level)
    }
}

fn overshoot(m: &LevyModel, a: OvershootArgs) -> Result<Outcome, Failure> {
    let s = match (a.s, a.discount) {
        (Some(s), Some(d)) if s != d => return Err(Failure::usage("--s and --discount disagree")),
        (s, d) => rate(s.or(d), "s")?,
    };
    let level = required(a.level, "level")?;
    let vs = points(a.x, a.xgrid.as_deref(), Some("0:5:51"))?;
    let law = overshoot_law(m, s, level)?;
    let dens = sweep(&vs, |v| law.density(v))?;
    let mut csv = Csv::new(&["level", "v", "density", "atom", "continuous_mass", "total_mass"]);
    for (v, d) in vs.iter().zip(dens) {
        csv.row(&[
            num(level),
            num(*v),
            num(d),
            num(law.atom()),
            num(law.continuous_mass()),
            num(law.total_mass()),
        ]);
    }
    Ok(ok(csv))
}

fn occupation(m: &LevyModel, a: OccupationArgs) -> Result<Outcome, Failure> {
    let s = rate(a.s, "s")?;
    let u = required(a.u, "u")?;
    let xs = points(a.x, a.xgrid.as_deref(), None)?;
    let t = OccupationTransform::new(m, s, u)?;
    let values = sweep(&xs, |x| t.value(x))?;
    let mut csv = Csv::new(&["x", "value"]);
    for (x, v) in xs.iter().zip(values) {
        csv.row(&[num(*x), num(v)]);
    }
    Ok(ok(csv))
}

fn ladder(m: &LevyModel, a: LadderArgs) -> Result<Outcome, Failure> {
    let s = required(a.s, "s")?;
    let r = Complex64::new(required(a.r, "r")?, a.r_im.unwrap_or(0.0));
    let kappa = ladder_exponent(m, s, r)?;
    let mut csv = Csv::new(&["s", "r_re", "r_im", "kappa_re", "kappa_im"]);
    csv.row(&[num(s), num(r.re), num(r.im), num(kappa.re), num(kappa.im)]);
    Ok(ok(csv))
}

/// Parses one `--functional` value.
pub fn parse_functional(text: &str) -> Result<Functional, String> {
    let mut parts = text.split(':');
    let name = parts.next().unwrap_or_default();
    let args: Vec<f64> = parts
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("functional '{text}': '{p}' is not a number")))
        .collect::<Result<_, _>>()?;
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(format!("functional '{text}': {name} takes {n} argument(s)"))
        }
    };
    let f = match name {
        "inf_below" => arity(1).map(|_| Functional::InfBelow(args[0])),
        "inf_zero" => arity(0).map(|_| Functional::InfAtZero),
        "sup_above" => arity(1).map(|_| Functional::SupAbove(args[0])),
        "sup_zero" => arity(0).map(|_| Functional::SupAtZero),
        "occupation" => arity(2).map(|_| Functional::OccupationMgf { level: args[0], u: args[1] }),
        "overshoot_bin" => arity(3).map(|_| Functional::OvershootBin {
            level: args[0],
            lo: args[1],
            hi: args[2],
        }),
        "overshoot_atom" => arity(1).map(|_| Functional::OvershootAtom { level: args[0] }),
        "passage" => arity(1).map(|_| Functional::PassageMgf { level: args[0] }),
        _ => Err(format!("unknown functional '{name}'")),
    }?;
    Ok(f)
}

fn simulate(m: &LevyModel, a: SimulateArgs) -> Result<Outcome, Failure> {
    let s = rate(a.s, "s")?;
    let specs = a.functional.unwrap_or_default();
    if specs.is_empty() {
        return Err(Failure::usage("at least one --functional is required"));
    }
    let functionals: Vec<Functional> = specs
        .iter()
        .map(|t| parse_functional(t))
        .collect::<Result<_, _>>()
        .map_err(Failure::usage)?;
    let config = SimConfig::new(a.paths.unwrap_or(100_000), a.seed.unwrap_or(0))
        .with_grid_steps(a.grid_steps.unwrap_or(DEFAULT_GRID_STEPS));
    let estimates = estimate_many(m, s, &functionals, &config)?;
    let mut csv = Csv::new(&["functional", "mean", "std_error", "n"]);
    for (name, e) in specs.iter().zip(estimates) {
        csv.row(&[name.clone(), num(e.mean), num(e.std_error), e.n.to_string()]);
    }
    Ok(ok(csv))
}

/// One row of the invariant suite.
struct Check {
    name: String,
    value: f64,
    tolerance: f64,
    status: &'static str,
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn record(&mut self, name: impl Into<String>, result: Result<f64, Error>, tolerance: f64) {
        let name = name.into();
        let (value, status) = match result {
            Ok(v) if v.is_finite() && v <= tolerance => (v, "pass"),
            Ok(v) => (v, "fail"),
            Err(Error::Unsupported(msg)) => {
                log::info!("{name} skipped: {msg}");
                (f64::NAN, "skip")
            }
            Err(e) => {
                log::warn!("{name}: {e}");
                (f64::NAN, "fail")
            }
        };
        self.checks.push(Check {
            name,
            value,
            tolerance,
            status,
        });
    }
}

fn max_of(values: impl IntoIterator<Item = Result<f64, Error>>) -> Result<f64, Error> {
    values.into_iter().try_fold(0.0f64, |acc, v| Ok(acc.max(v?)))
}

fn validate(m: &LevyModel, a: ValidateArgs) -> Result<Outcome, Failure> {
    let s = a.s.unwrap_or(1.0);
    if !(s.is_finite() && s > 0.0) {
        return Err(Failure::usage(format!("--s must be positive (got {s})")));
    }
    let tol = a.tol.unwrap_or(1e-8);
    let mut suite = Suite { checks: Vec::new() };

    for side in [Side::Negative, Side::Positive] {
        let sym = side.symbol();
        let Some(expected) = m.root_count(side) else { continue };
        match solve_roots(m, s, side) {
            Ok(set) => {
                let worst = set.residuals.iter().copied().fold(0.0, f64::max) / (1.0 + s);
                suite.record(format!("root_residual_{sym}"), Ok(worst), 1e-9);
                let miss = (set.count() as f64 - expected as f64).abs();
                suite.record(format!("root_count_{sym}"), Ok(miss), 0.0);
                if let Jumps::Me(spec) = m.jumps(side) {
                    let b1 = spec.dominant_rate();
                    let r1 = set.first().unwrap_or(0.0);
                    let out = (-r1).max(r1 - b1).max(0.0);
                    suite.record(format!("first_root_bound_{sym}"), Ok(out), 0.0);
                }
            }
            Err(e) => suite.record(format!("root_residual_{sym}"), Err(e), 1e-9),
        }
    }

    let omegas = parse_grid("0.1:50:100").expect("static grid");
    let wh = max_of(omegas.par_iter().map(|&w| wiener_hopf_residual(m, s, Complex64::new(0.0, w))).collect::<Vec<_>>());
    suite.record("wiener_hopf_max_residual", wh, tol);

    for side in [Side::Negative, Side::Positive] {
        let sym = side.symbol();
        let law = if m.jumps(side).is_me_or_none() {
            build_component(m, s, side).map(ExtremumLaw::Matrix)
        } else {
            opposite_extremum(m, s, side).map(ExtremumLaw::Transform)
        };
        match law {
            Ok(ExtremumLaw::Matrix(c)) => {
                suite.record(format!("extremum_mass_{sym}"), c.density_mass().map(|d| (c.atom() + d - 1.0).abs()), tol);
                suite.record(format!("extremum_mgf_at_zero_{sym}"), c.mgf(Complex64::new(0.0, 0.0)).map(|v| (v - 1.0).norm()), 0.0);
            }
            Ok(ExtremumLaw::Transform(t)) => {
                suite.record(format!("extremum_mgf_at_zero_{sym}"), t.mgf(Complex64::new(0.0, 0.0)).map(|v| (v - 1.0).norm()), 0.0);
            }
            Err(e) => suite.record(format!("extremum_mass_{sym}"), Err(e), tol),
        }
    }

    let levels = [0.25, 1.0, 2.5];
    let balance = max_of(levels.iter().map(|&x| {
        let law = discounted_overshoot(m, s, x)?;
        Ok((law.atom() + law.continuous_mass() - law.total_mass()).abs())
    }));
    suite.record("overshoot_mass_balance", balance, tol);

    let u = 1.0;
    let grid = if m.pos_jumps().is_me_or_none() { "-3:3:25" } else { "-3:0:13" };
    let xs = parse_grid(grid).expect("static grid");
    let monotone = OccupationTransform::new(m, s, u).and_then(|t| {
        let vals = xs.iter().map(|&x| t.value(x)).collect::<Result<Vec<_>, _>>()?;
        let lo = s / (s + u);
        let bounds = vals.iter().map(|v| (lo - v).max(v - 1.0).max(0.0)).fold(0.0, f64::max);
        let drops = vals.windows(2).map(|w| (w[0] - w[1]).max(0.0)).fold(0.0, f64::max);
        Ok(bounds.max(drops))
    });
    suite.record("occupation_bounds_monotone", monotone, 1e-10);

    let rs = [0.3, 1.0, 2.0].map(|w| Complex64::new(0.0, w));
    let identity = max_of(rs.iter().map(|&r| occupation_identity_residual(m, s, u, r)));
    suite.record("occupation_identity_residual", identity, tol);

    let mut csv = Csv::new(&["check", "value", "tolerance", "status"]);
    let mut passed = true;
    for c in &suite.checks {
        passed &= c.status != "fail";
        csv.row(&[c.name.clone(), num(c.value), num(c.tolerance), c.status.to_string()]);
    }
    Ok(Outcome {
        csv: csv.render(),
        passed,
    })
}

//! Occupation times above a level: `D_x(s, u) = E exp(-u int_0^{theta_s} I{X_t > x} dt)`,
//! its `s -> 0` limit (total time in the risk zone), the explicit sums for
//! hyperexponential jumps, and the ladder exponent `kappa(s, r)`.
//!
//! `s = 0` everywhere denotes the undiscounted limit.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::factorization::{
    absolute_extremum, build_component, limit_component, matrix_tail_transform, ExtremumLaw, FactorizationComponent,
    TailRoute,
};
use crate::linalg::{expm, unit_last};
use crate::model::{Case, LevyModel, Side};
use crate::numeric::coerce_real;
use crate::overshoot::Kernel;
use crate::quad::{integrate, integrate_c_to_inf, Tolerance};
use crate::roots::{limiting_roots, solve_roots};

/// `D(x) = base + factor * diff R^{-1} e^{R x} e` with derivative
/// `factor * diff e^{R x} e`.
#[derive(Debug, Clone)]
struct MatrixBranch {
    base: f64,
    factor: f64,
    diff: DVector<f64>,
    r: DMatrix<f64>,
    d0: f64,
}

impl MatrixBranch {
    fn kernel(&self, x: f64) -> DVector<f64> {
        expm(&(&self.r * x)) * unit_last(self.r.nrows())
    }

    fn value(&self, x: f64) -> Result<f64> {
        if self.diff.is_empty() {
            return Ok(self.base);
        }
        let y = self
            .r
            .clone()
            .lu()
            .solve(&self.kernel(x))
            .ok_or_else(|| Error::Numerical("singular companion matrix".into()))?;
        Ok(self.base + self.factor * self.diff.dot(&y))
    }

    fn derivative(&self, x: f64) -> f64 {
        if self.diff.is_empty() {
            return 0.0;
        }
        self.factor * self.diff.dot(&self.kernel(x))
    }
}

/// Positive levels when `sigma = 0`, `a <= 0`: the prelimit generalization
/// of the Pollaczek-Khinchin route.
#[derive(Debug, Clone)]
struct StepwiseBranch {
    plus: ExtremumLaw,
    weight: f64,
    kernel: Kernel,
    d0: f64,
}

impl StepwiseBranch {
    fn value(&self, x: f64) -> Result<f64> {
        let err = std::cell::RefCell::new(None);
        let cont = integrate(
            |z| match self.kernel.l(x - z) {
                Ok(v) => v * self.plus.density(z),
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            0.0,
            x,
            Tolerance::new(1e-13, 1e-11),
        )?;
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        let bracket = self.plus.atom() * self.kernel.l(x)? + cont;
        Ok(self.plus.cdf(x)? + self.weight * bracket)
    }
}

/// Evaluator of `x -> D_x(s, u)` for fixed `(s, u)`.
#[derive(Debug, Clone)]
pub struct OccupationTransform {
    s: f64,
    u: f64,
    degenerate: bool,
    neg: Option<MatrixBranch>,
    pos: Option<MatrixBranch>,
    stepwise: Option<StepwiseBranch>,
    neg_reason: String,
    pos_reason: String,
}

fn neg_branch_allowed(model: &LevyModel) -> std::result::Result<(), String> {
    if !model.neg_jumps().is_me_or_none() {
        return Err("levels x < 0 require matrix-exponential negative jumps".into());
    }
    match model.case(Side::Negative) {
        Case::NonStepwise => Ok(()),
        Case::Stepwise if model.drift() > 0.0 => Ok(()),
        Case::Stepwise => Err("levels x <= 0 require (NS)- or (S)- with a > 0".into()),
    }
}

fn pos_branch_allowed(model: &LevyModel) -> std::result::Result<(), String> {
    if !model.pos_jumps().is_me_or_none() {
        return Err("levels x > 0 require matrix-exponential positive jumps".into());
    }
    match model.case(Side::Positive) {
        Case::NonStepwise => Ok(()),
        Case::Stepwise if model.drift() < 0.0 => Ok(()),
        Case::Stepwise => Err("levels x >= 0 require (NS)+ or (S)+ with a < 0".into()),
    }
}

fn stepwise_allowed(model: &LevyModel) -> bool {
    model.sigma() == 0.0 && model.drift() <= 0.0 && model.neg_jumps().is_me_or_none()
}

fn rho_vec(c: &FactorizationComponent) -> DVector<f64> {
    DVector::from_column_slice(c.rho())
}

fn product_tail(c: &FactorizationComponent) -> Result<f64> {
    coerce_real(c.roots()[1..].iter().product(), "product of limiting roots")
}

/// Positive-side component at `s`, or the proper supremum law at `s = 0`.
fn positive_component(model: &LevyModel, s: f64) -> Result<FactorizationComponent> {
    if s > 0.0 {
        return build_component(model, s, Side::Positive);
    }
    match absolute_extremum(model)?.law {
        ExtremumLaw::Matrix(c) if c.side() == Side::Positive => Ok(c),
        _ => Err(Error::Precondition("the supremum is not proper for this model".into())),
    }
}

impl OccupationTransform {
    /// `s > 0` for the killed transform, `s = 0` for the total sojourn time.
    pub fn new(model: &LevyModel, s: f64, u: f64) -> Result<OccupationTransform> {
        if !(s >= 0.0) || !(u > 0.0) || !s.is_finite() || !u.is_finite() {
            return Err(Error::Precondition(format!("occupation needs s >= 0 and u > 0 (got s = {s}, u = {u})")));
        }
        let mut out = OccupationTransform {
            s,
            u,
            degenerate: false,
            neg: None,
            pos: None,
            stepwise: None,
            neg_reason: String::new(),
            pos_reason: String::new(),
        };
        let mean = if s == 0.0 {
            let mean = model
                .mean()
                .ok_or_else(|| Error::Precondition("the mean of X_1 is undefined".into()))?;
            if mean == 0.0 {
                return Err(Error::Precondition("the total sojourn time needs mu != 0".into()));
            }
            if mean > 0.0 {
                out.degenerate = true;
                return Ok(out);
            }
            mean
        } else {
            0.0
        };
        match neg_branch_allowed(model) {
            Ok(()) => out.neg = Some(Self::neg_branch(model, s, u, mean)?),
            Err(reason) => out.neg_reason = reason,
        }
        match pos_branch_allowed(model) {
            Ok(()) => out.pos = Some(Self::pos_branch(model, s, u)?),
            Err(reason) => out.pos_reason = reason,
        }
        if out.pos.is_none() && stepwise_allowed(model) {
            out.stepwise = Some(Self::stepwise_branch(model, s, u)?);
        }
        Ok(out)
    }

    fn neg_branch(model: &LevyModel, s: f64, u: f64, mean: f64) -> Result<MatrixBranch> {
        let cu = build_component(model, s + u, Side::Negative)?;
        if s > 0.0 {
            let cs = build_component(model, s, Side::Negative)?;
            let ratio = cu.rho().first().copied().unwrap_or(1.0) / cs.rho().first().copied().unwrap_or(1.0);
            let w = s / (s + u);
            Ok(MatrixBranch {
                base: w,
                factor: -w * ratio,
                diff: rho_vec(&cs) - rho_vec(&cu),
                r: cu.r_matrix().clone(),
                d0: w * ratio,
            })
        } else {
            let lim = limit_component(model)?;
            let factor = mean.abs() * cu.rho()[0] / (u * product_tail(&lim)?);
            Ok(MatrixBranch {
                base: 0.0,
                factor,
                diff: rho_vec(&cu) - rho_vec(&lim),
                r: cu.r_matrix().clone(),
                d0: factor,
            })
        }
    }

    fn pos_branch(model: &LevyModel, s: f64, u: f64) -> Result<MatrixBranch> {
        let cs = positive_component(model, s)?;
        let cu = build_component(model, s + u, Side::Positive)?;
        let ratio = cs.rho().first().copied().unwrap_or(1.0) / cu.rho().first().copied().unwrap_or(1.0);
        Ok(MatrixBranch {
            base: 1.0,
            factor: ratio,
            diff: rho_vec(&cu) - rho_vec(&cs),
            r: cs.r_matrix().clone(),
            d0: ratio,
        })
    }

    fn stepwise_branch(model: &LevyModel, s: f64, u: f64) -> Result<StepwiseBranch> {
        let plus = if s > 0.0 {
            ExtremumLaw::killed(model, s, Side::Positive)?
        } else {
            absolute_extremum(model)?.law
        };
        let p_su = ExtremumLaw::killed(model, s + u, Side::Positive)?.atom();
        let comp = build_component(model, s + u, Side::Negative)?;
        let kernel = Kernel::new(&comp, 1.0, model.pos_jumps())?;
        Ok(StepwiseBranch {
            d0: plus.atom() / p_su,
            weight: 1.0 / (s + u),
            plus,
            kernel,
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    /// `D_0(s, u)` from the negative branch when available, else the positive
    /// limit `D_{+0}`.
    pub fn d0(&self) -> Result<f64> {
        if self.degenerate {
            return Ok(0.0);
        }
        if let Some(b) = &self.neg {
            return Ok(b.d0);
        }
        self.d0_positive()
    }

    /// `D_{+0}(s, u)` from the positive branch.
    pub fn d0_positive(&self) -> Result<f64> {
        if self.degenerate {
            return Ok(0.0);
        }
        if let Some(b) = &self.pos {
            return Ok(b.d0);
        }
        if let Some(b) = &self.stepwise {
            return Ok(b.d0);
        }
        Err(Error::Precondition(self.pos_reason.clone()))
    }

    /// `D_x(s, u)`.
    pub fn value(&self, x: f64) -> Result<f64> {
        if self.degenerate {
            return Ok(0.0);
        }
        if x == 0.0 {
            return self.d0();
        }
        if x < 0.0 {
            return match &self.neg {
                Some(b) => b.value(x),
                None => Err(Error::Precondition(self.neg_reason.clone())),
            };
        }
        if let Some(b) = &self.pos {
            return b.value(x);
        }
        if let Some(b) = &self.stepwise {
            return b.value(x);
        }
        Err(Error::Precondition(self.pos_reason.clone()))
    }

    /// `d/dx D_x(s, u)` from the matrix branches.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        if self.degenerate {
            return Ok(0.0);
        }
        let branch = if x < 0.0 { &self.neg } else { &self.pos };
        match branch {
            Some(b) => Ok(b.derivative(x)),
            None => Err(Error::Precondition(if x < 0.0 {
                self.neg_reason.clone()
            } else {
                "the derivative for x > 0 needs (NS)+ or (S)+ with a < 0 and ME positive jumps".into()
            })),
        }
    }
}

/// `D_x(s, u)` for `s > 0`.
pub fn occupation_mgf(model: &LevyModel, s: f64, u: f64, x: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Precondition(format!("the killing rate must be positive (got {s})")));
    }
    OccupationTransform::new(model, s, u)?.value(x)
}

/// `E exp(-u int_0^inf I{X_t > x} dt)`; zero when `mu > 0`.
pub fn occupation_limit(model: &LevyModel, u: f64, x: f64) -> Result<f64> {
    OccupationTransform::new(model, 0.0, u)?.value(x)
}

fn real_distinct(roots: &[Complex64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(roots.len());
    for r in roots {
        if r.im.abs() > 1e-9 * (1.0 + r.norm()) {
            return Err(Error::Unsupported("explicit sums need real roots; use the matrix route".into()));
        }
        out.push(r.re);
    }
    for i in 0..out.len() {
        for j in i + 1..out.len() {
            if (out[i] - out[j]).abs() <= 1e-7 * (1.0 + out[i].abs()) {
                return Err(Error::Unsupported("explicit sums need distinct roots; use the matrix route".into()));
            }
        }
    }
    Ok(out)
}

fn hyperexp_side_check(model: &LevyModel, side: Side) -> Result<()> {
    let reason = match side {
        Side::Negative => neg_branch_allowed(model),
        Side::Positive => pos_branch_allowed(model),
    };
    reason.map_err(Error::Precondition)?;
    if let Some(spec) = model.jumps(side).as_me() {
        if !spec.has_distinct_real_rates() {
            return Err(Error::Unsupported(format!("the {side} jump rates are not real and distinct")));
        }
    }
    Ok(())
}

/// `D_x(s, u)` by explicit partial-fraction sums over real distinct roots
/// (`s = 0` for the total sojourn time).
pub fn hyperexp_occupation(model: &LevyModel, s: f64, u: f64, x: f64) -> Result<f64> {
    if !(s >= 0.0) || !(u > 0.0) {
        return Err(Error::Precondition(format!("occupation needs s >= 0 and u > 0 (got s = {s}, u = {u})")));
    }
    let mean = if s == 0.0 {
        let mean = model
            .mean()
            .ok_or_else(|| Error::Precondition("the mean of X_1 is undefined".into()))?;
        if mean == 0.0 {
            return Err(Error::Precondition("the total sojourn time needs mu != 0".into()));
        }
        if mean > 0.0 {
            return Ok(0.0);
        }
        mean
    } else {
        0.0
    };
    if x <= 0.0 {
        hyperexp_side_check(model, Side::Negative)?;
        let ru = real_distinct(&solve_roots(model, s + u, Side::Negative)?.roots)?;
        if s > 0.0 {
            let rs = real_distinct(&solve_roots(model, s, Side::Negative)?.roots)?;
            let w = s / (s + u);
            if x == 0.0 {
                return Ok(w * ru.iter().zip(&rs).map(|(a, b)| a / b).product::<f64>());
            }
            let mut sum = 1.0;
            for (k, rk) in ru.iter().enumerate() {
                let num: f64 = rs.iter().map(|ri| rk / ri - 1.0).product();
                let den: f64 = ru.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, ri)| rk / ri - 1.0).product();
                sum += num / den * (rk * x).exp();
            }
            Ok(w * sum)
        } else {
            let lim = limiting_roots(model, Side::Negative)?;
            let r0 = real_distinct(&lim.roots[1..])?;
            let c = mean.abs() / u;
            if x == 0.0 {
                let num: f64 = ru.iter().product();
                let den: f64 = r0.iter().product();
                return Ok(c * num / den);
            }
            let mut sum = 0.0;
            for (k, rk) in ru.iter().enumerate() {
                let num: f64 = r0.iter().map(|ri| rk / ri - 1.0).product();
                let den: f64 = ru.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, ri)| rk / ri - 1.0).product();
                sum += num / den * rk * (rk * x).exp();
            }
            Ok(c * sum)
        }
    } else {
        hyperexp_side_check(model, Side::Positive)?;
        let ru = real_distinct(&solve_roots(model, s + u, Side::Positive)?.roots)?;
        let rs = if s > 0.0 {
            real_distinct(&solve_roots(model, s, Side::Positive)?.roots)?
        } else {
            real_distinct(&limiting_roots(model, Side::Positive)?.roots)?
        };
        let mut sum = 1.0;
        for (k, rk) in rs.iter().enumerate() {
            let num: f64 = ru.iter().map(|ri| 1.0 - rk / ri).product();
            let den: f64 = rs.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, ri)| 1.0 - rk / ri).product();
            sum -= num / den * (-rk * x).exp();
        }
        Ok(sum)
    }
}

/// `D_x(s, u)` for `x > 0` through the supremum law and the positive jump
/// tail (`sigma = 0`, `a <= 0`, ME negative jumps; `s = 0` needs `mu < 0`).
pub fn stepwise_occupation(model: &LevyModel, s: f64, u: f64, x: f64) -> Result<f64> {
    if !stepwise_allowed(model) {
        return Err(Error::Precondition("this route needs sigma = 0, a <= 0 and ME negative jumps".into()));
    }
    if !(x > 0.0) || !(u > 0.0) || !(s >= 0.0) {
        return Err(Error::Precondition(format!("this route needs x > 0, u > 0, s >= 0 (got x = {x})")));
    }
    if s == 0.0 && model.mean().is_none_or(|m| m >= 0.0) {
        return Err(Error::Precondition("the total sojourn time route needs mu < 0".into()));
    }
    OccupationTransform::stepwise_branch(model, s, u)?.value(x)
}

/// `D_{+0}(s, u) = P{X+_{theta_s} = 0} / P{X+_{theta_{s+u}} = 0}` under (S)+.
pub fn positive_d0_from_atoms(model: &LevyModel, s: f64, u: f64) -> Result<f64> {
    if model.case(Side::Positive) != Case::Stepwise {
        return Err(Error::Precondition("the atom form of D_{+0} requires (S)+".into()));
    }
    let num = if s > 0.0 {
        ExtremumLaw::killed(model, s, Side::Positive)?.atom()
    } else {
        absolute_extremum(model)?.law.atom()
    };
    Ok(num / ExtremumLaw::killed(model, s + u, Side::Positive)?.atom())
}

fn check_ladder_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::OutsideDomain(format!("the ladder exponent is defined for 0 < s < 1 (got {s})")));
    }
    Ok(())
}

/// `kappa(s, r) = D_0(s, 1 - s) / E e^{-r X+_{theta_s}}` for `0 < s < 1`.
pub fn ladder_exponent(model: &LevyModel, s: f64, r: Complex64) -> Result<Complex64> {
    check_ladder_s(s)?;
    let d0 = OccupationTransform::new(model, s, 1.0 - s)?.d0()?;
    let mgf = ExtremumLaw::killed(model, s, Side::Positive)?.mgf(-r)?;
    Ok(d0 / mgf)
}

/// Closed form of `kappa(s, r)` through the negative-side component and the
/// positive tail transform (ME negative jumps, (NS)- or (S)- with a > 0).
pub fn ladder_exponent_closed_form(model: &LevyModel, s: f64, r: Complex64) -> Result<Complex64> {
    check_ladder_s(s)?;
    neg_branch_allowed(model).map_err(Error::Precondition)?;
    let comp = build_component(model, s, Side::Negative)?;
    let ratio = build_component(model, 1.0, Side::Negative)?.rho()[0] / comp.rho()[0];
    if r == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(s * ratio, 0.0));
    }
    // kappa(s, -z) with z = -r
    let z = -r;
    let rates: Vec<Complex64> = model.neg_jumps().me_rates().map(<[Complex64]>::to_vec).unwrap_or_default();
    let minus_mgf = comp.mgf_product(z, &rates)?;
    let jumps = model.pos_jumps();
    let pt = if matches!(jumps, crate::model::Jumps::None) {
        Complex64::new(0.0, 0.0)
    } else {
        jumps.transform(z)?
    };
    let tail = matrix_tail_transform(jumps, &comp, TailRoute::Quadrature)?;
    let n = comp.count();
    let resolvent = if n == 0 {
        Complex64::new(0.0, 0.0)
    } else {
        let y = crate::linalg::solve_shifted(comp.r_matrix(), z, &tail)?;
        comp.q().iter().zip(y.iter()).map(|(a, b)| a * b).sum()
    };
    Ok(ratio * (s - z * (comp.creep() + minus_mgf * pt - resolvent)))
}

/// Closed form of `kappa(s, r)` for compound Poisson processes with negative
/// drift and ME jumps on both sides.
pub fn ladder_exponent_compound_poisson(model: &LevyModel, s: f64, r: Complex64) -> Result<Complex64> {
    check_ladder_s(s)?;
    if !(model.sigma() == 0.0 && model.drift() < 0.0) {
        return Err(Error::Precondition("this closed form needs sigma = 0 and a < 0".into()));
    }
    let pos = model
        .pos_jumps()
        .as_me()
        .ok_or_else(|| Error::Precondition("this closed form needs ME positive jumps".into()))?;
    if !model.neg_jumps().is_me_or_none() {
        return Err(Error::Precondition("this closed form needs ME negative jumps".into()));
    }
    let neg_s = build_component(model, s, Side::Negative)?;
    let neg_1 = build_component(model, 1.0, Side::Negative)?;
    let pos_s = build_component(model, s, Side::Positive)?;
    let beta = pos.denominator();
    let rho = pos_s.rho();
    // (rho, 1) h(r) / (beta, 1) h(r) = prod(r + r_i) / prod(r + c_i)
    let horner = |coeffs: &[f64]| -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for c in coeffs.iter().rev() {
            acc = acc * r + c;
        }
        acc
    };
    let ratio = horner(rho) / horner(beta);
    Ok(s * neg_1.rho()[0] / neg_s.rho()[0] * beta[0] / rho[0] * ratio)
}

/// Residual of the negative-level identity
/// `int_{-inf}^0 e^{rx} D'_x dx - D_0 + s/(s+u) E e^{r X-_{theta_{s+u}}} / E e^{r X-_{theta_s}}`.
pub fn occupation_identity_residual(model: &LevyModel, s: f64, u: f64, r: Complex64) -> Result<f64> {
    if model.sigma() == 0.0 && model.drift() == 0.0 {
        return Err(Error::Precondition("the identity needs a non step-wise process (sigma > 0 or a != 0)".into()));
    }
    if !(s > 0.0) {
        return Err(Error::Precondition(format!("the killing rate must be positive (got {s})")));
    }
    let occ = OccupationTransform::new(model, s, u)?;
    let branch = occ.neg.as_ref().ok_or_else(|| Error::Precondition(occ.neg_reason.clone()))?;
    let cs = build_component(model, s, Side::Negative)?;
    let cu = build_component(model, s + u, Side::Negative)?;
    let decay = cu.roots().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let integral = integrate_c_to_inf(
        |t| (-r * t).exp() * branch.derivative(-t),
        0.0,
        1.0 / decay,
        Tolerance::new(1e-14, 1e-12),
    )?;
    let rhs = s / (s + u) * cu.mgf(r)? / cs.mgf(r)?;
    Ok((integral - branch.d0 + rhs).norm())
}

/// Residual of the positive-level identity at `s = 0`:
/// `int_0^inf e^{rx} D'_x(0, u) dx + D_0(0, u) - E e^{r X+} / E e^{r X+_{theta_u}}`.
pub fn sojourn_identity_residual(model: &LevyModel, u: f64, r: Complex64) -> Result<f64> {
    let occ = OccupationTransform::new(model, 0.0, u)?;
    if occ.degenerate {
        return Err(Error::Precondition("the identity needs mu < 0".into()));
    }
    let branch = occ.pos.as_ref().ok_or_else(|| Error::Precondition(occ.pos_reason.clone()))?;
    let decay = branch
        .r
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| -z.re)
        .fold(f64::INFINITY, f64::min);
    let integral = integrate_c_to_inf(
        |x| (r * x).exp() * branch.derivative(x),
        0.0,
        1.0 / decay,
        Tolerance::new(1e-14, 1e-12),
    )?;
    let rhs = absolute_extremum(model)?.law.mgf(r)? / ExtremumLaw::killed(model, u, Side::Positive)?.mgf(r)?;
    Ok((integral + branch.d0 - rhs).norm())
}

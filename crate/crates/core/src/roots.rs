//! Roots of the cumulant equation `k(r) = s` in each half-plane.
//!
//! Roots are reported as values `r_i` with positive real part; the cumulant
//! roots themselves are `+r_i` for the positive side and `-r_i` for the
//! negative side.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{Jumps, LevyModel, Side};
use crate::poly::{polynomial_roots, Poly};
use crate::quad::{integrate_c, Tolerance};

/// Roots closer than this are flagged as near-multiple.
pub const NEAR_MULTIPLE_TOL: f64 = 1e-7;

const WINDING_TOL: f64 = 0.25;
const MAX_RADIUS_FACTOR: f64 = 1e4;

/// The roots of `k(r) = s` in one half-plane.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub side: Side,
    pub s: f64,
    /// Roots with positive real part (or zero for a vanishing limit root),
    /// sorted by real then imaginary part.
    pub roots: Vec<Complex64>,
    /// `|k(+-r_i) - s|` per root.
    pub residuals: Vec<f64>,
    pub near_multiple: bool,
}

impl RootSet {
    pub fn count(&self) -> usize {
        self.roots.len()
    }

    /// `r_1`, the real root with the smallest real part.
    pub fn first(&self) -> Option<f64> {
        self.roots.first().map(|z| z.re)
    }

    fn from_roots(model: &LevyModel, side: Side, s: f64, mut roots: Vec<Complex64>) -> RootSet {
        sort_roots(&mut roots);
        let residuals = roots
            .iter()
            .map(|r| (model.cumulant_unchecked(side.sign() * r) - s).norm())
            .collect();
        let near_multiple = roots
            .iter()
            .enumerate()
            .any(|(i, a)| roots[i + 1..].iter().any(|b| (a - b).norm() < NEAR_MULTIPLE_TOL));
        RootSet {
            side,
            s,
            roots,
            residuals,
            near_multiple,
        }
    }
}

fn sort_roots(roots: &mut [Complex64]) {
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

fn residual_tol(s: f64) -> f64 {
    1e-9 * (1.0 + s)
}

/// Clears the denominators of `k(r) - s` when both jump sides are ME or absent.
/// The result has ascending coefficients and the same roots as `k(r) = s`.
pub fn cumulant_polynomial(model: &LevyModel, s: f64) -> Result<Poly> {
    let (p_neg, d_neg) = side_polys(model.neg_jumps())?;
    let (p_pos, d_pos) = side_polys(model.pos_jumps())?;
    let dd = d_neg.mul(&d_pos);
    let lin = Poly::new(vec![model.drift(), 0.5 * model.sigma() * model.sigma()]);
    let inner = lin.mul(&dd).add(&p_pos.mul(&d_neg)).sub(&p_neg.mul(&d_pos));
    Ok(Poly::x().mul(&inner).sub(&dd.scale(s)))
}

/// `(lambda P, Q)` with tail transform `lambda P / Q`.
fn side_polys(jumps: &Jumps) -> Result<(Poly, Poly)> {
    match jumps {
        Jumps::None => Ok((Poly::constant(0.0), Poly::constant(1.0))),
        Jumps::Me(spec) => {
            let (p, q) = spec.transform_polys();
            Ok((p.scale(spec.intensity()), q.clone()))
        }
        Jumps::General(_) => Err(Error::Unsupported(
            "the cleared cumulant polynomial needs both jump sides matrix-exponential or absent".into(),
        )),
    }
}

/// Roots of `k(r) = s` on `side`, for `s > 0`.
pub fn solve_roots(model: &LevyModel, s: f64, side: Side) -> Result<RootSet> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Precondition(format!("killing rate must be positive (got {s})")));
    }
    let expected = model.root_count(side).ok_or_else(|| {
        Error::Unsupported(format!("the {side} jump side is not matrix-exponential"))
    })?;
    let roots = if model.neg_jumps().is_me_or_none() && model.pos_jumps().is_me_or_none() {
        let (neg, pos) = bilateral_roots(model, s)?;
        match side {
            Side::Negative => neg,
            Side::Positive => pos,
        }
    } else {
        half_plane_roots(model, s, side, expected)?
    };
    finish(model, s, side, roots, expected)
}

/// Both root systems at once; both jump sides must be ME or absent.
pub fn solve_all_roots(model: &LevyModel, s: f64) -> Result<(RootSet, RootSet)> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Precondition(format!("killing rate must be positive (got {s})")));
    }
    let (neg, pos) = bilateral_roots(model, s)?;
    let n_neg = model.root_count(Side::Negative).expect("ME side");
    let n_pos = model.root_count(Side::Positive).expect("ME side");
    Ok((
        finish(model, s, Side::Negative, neg, n_neg)?,
        finish(model, s, Side::Positive, pos, n_pos)?,
    ))
}

fn finish(model: &LevyModel, s: f64, side: Side, roots: Vec<Complex64>, expected: usize) -> Result<RootSet> {
    if roots.len() != expected {
        return Err(Error::RootFinding(format!(
            "found {} roots on the {side} side but the case table requires {expected}",
            roots.len()
        )));
    }
    let set = RootSet::from_roots(model, side, s, roots);
    for (r, res) in set.roots.iter().zip(&set.residuals) {
        if !(*res < residual_tol(s)) {
            return Err(Error::RootFinding(format!(
                "root {r} on the {side} side has residual {res:e}"
            )));
        }
    }
    Ok(set)
}

/// Splits the roots of the cleared polynomial by half-plane and polishes them
/// on `k(r) - s`.
fn bilateral_roots(model: &LevyModel, s: f64) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let poly = cumulant_polynomial(model, s)?;
    let poly = if s == 0.0 { poly.shift_down() } else { poly };
    let raw = polynomial_roots(poly.coeffs())?;
    let mut neg = Vec::new();
    let mut pos = Vec::new();
    for z in raw {
        let z = polish(model, s, z);
        if z.re < 0.0 {
            neg.push(-z);
        } else {
            pos.push(z);
        }
    }
    Ok((symmetrize(model, s, neg, -1.0), symmetrize(model, s, pos, 1.0)))
}

/// Newton refinement on `k(r) - s` itself.
fn polish(model: &LevyModel, s: f64, mut z: Complex64) -> Complex64 {
    let f = |w: Complex64| model.cumulant_unchecked(w) - s;
    let mut fz = f(z);
    for _ in 0..30 {
        let d = model.cumulant_derivative(z);
        if d.norm() == 0.0 || !d.re.is_finite() {
            break;
        }
        let next = z - fz / d;
        let fnext = f(next);
        if !(fnext.norm() < fz.norm()) {
            break;
        }
        let step = (next - z).norm();
        z = next;
        fz = fnext;
        if step <= 1e-16 * (1.0 + z.norm()) {
            break;
        }
    }
    z
}

/// Forces exact reality and conjugate pairing on roots of a real equation.
fn symmetrize(model: &LevyModel, s: f64, roots: Vec<Complex64>, sign: f64) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = Vec::with_capacity(roots.len());
    let mut uppers = Vec::new();
    let mut lowers = 0usize;
    for z in roots {
        if z.im.abs() <= 1e-8 * (1.0 + z.norm()) {
            let real = polish(model, s, Complex64::new(sign * z.re, 0.0));
            out.push(Complex64::new(sign * real.re, 0.0));
        } else if z.im > 0.0 {
            uppers.push(z);
        } else {
            lowers += 1;
        }
    }
    if uppers.len() != lowers {
        log::warn!("unpaired complex roots: {} upper vs {} lower", uppers.len(), lowers);
    }
    for z in uppers {
        out.push(z.conj());
        out.push(z);
    }
    sort_roots(&mut out);
    out
}

/// Argument-principle solver on half-disc contours for models where one jump
/// side is general. Works on `h(r) = (k(r) - s) D(r)` with `D` the ME
/// denominator of the solved side, which is analytic in that half-plane.
fn half_plane_roots(model: &LevyModel, s: f64, side: Side, expected: usize) -> Result<Vec<Complex64>> {
    if side == Side::Positive {
        let mirrored = model.mirrored();
        return half_plane_roots(&mirrored, s, Side::Negative, expected);
    }
    let den = match model.neg_jumps() {
        Jumps::None => Poly::constant(1.0),
        Jumps::Me(spec) => Poly::monic(spec.denominator()),
        Jumps::General(_) => {
            return Err(Error::Unsupported("the negative jump side is not matrix-exponential".into()))
        }
    };
    let dden = den.derivative();
    // At s = 0 the trivial root r = 0 is removed by working with k(r)/r.
    let h = |r: Complex64| -> (Complex64, Complex64) {
        let (g, dg) = if s == 0.0 {
            (model.cumulant_over_r(r), model.cumulant_over_r_derivative(r))
        } else {
            (model.cumulant_unchecked(r) - s, model.cumulant_derivative(r))
        };
        let dv = den.eval_c(r);
        (g * dv, dg * dv + g * dden.eval_c(r))
    };
    let base = model.max_rate() + model.drift().abs() + model.sigma().powi(2) + s;
    let max_radius = MAX_RADIUS_FACTOR * model.max_rate().max(1.0);
    let mut radius = base.max(1e-3);
    loop {
        let moments = contour_moments(&h, radius, expected + 1)?;
        let count = moments[0].re;
        let rounded = count.round();
        if (count - rounded).abs() > WINDING_TOL || moments[0].im.abs() > WINDING_TOL {
            return Err(Error::RootFinding(format!(
                "winding number {} at radius {radius} is not close to an integer",
                moments[0]
            )));
        }
        let n = rounded as usize;
        if n == expected {
            let roots = roots_from_moments(&moments, radius, n)?;
            let polished: Vec<Complex64> = roots.into_iter().map(|z| polish_general(model, s, z)).collect();
            let neg: Vec<Complex64> = polished.into_iter().map(|z| -z).collect();
            return Ok(symmetrize_general(model, s, neg));
        }
        if n > expected {
            return Err(Error::RootFinding(format!(
                "found {n} roots in the left half-disc of radius {radius}, more than the {expected} required"
            )));
        }
        radius *= 2.0;
        if radius > max_radius {
            return Err(Error::RootFinding(format!(
                "only {n} of {expected} roots found before the contour radius exceeded {max_radius}"
            )));
        }
    }
}

fn polish_general(model: &LevyModel, s: f64, z: Complex64) -> Complex64 {
    if s > 0.0 {
        return polish(model, s, z);
    }
    let mut z = z;
    for _ in 0..30 {
        let g = model.cumulant_over_r(z);
        let d = model.cumulant_over_r_derivative(z);
        let next = z - g / d;
        if !(model.cumulant_over_r(next).norm() < g.norm()) {
            break;
        }
        z = next;
    }
    z
}

fn symmetrize_general(model: &LevyModel, s: f64, roots: Vec<Complex64>) -> Vec<Complex64> {
    if s > 0.0 {
        return symmetrize(model, s, roots, -1.0);
    }
    let mut out: Vec<Complex64> = roots
        .into_iter()
        .map(|z| if z.im.abs() <= 1e-8 * (1.0 + z.norm()) { Complex64::new(z.re, 0.0) } else { z })
        .collect();
    sort_roots(&mut out);
    out
}

/// Scaled moments `(1 / 2 pi i) oint (r / R)^p h'(r) / h(r) dr`, `p = 0..count`,
/// over the left half-disc of radius `R`.
fn contour_moments<H>(h: &H, radius: f64, count: usize) -> Result<Vec<Complex64>>
where
    H: Fn(Complex64) -> (Complex64, Complex64),
{
    let tol = Tolerance {
        abs: 1e-11,
        rel: 1e-11,
        max_intervals: 20_000,
    };
    let i = Complex64::new(0.0, 1.0);
    let mut out = Vec::with_capacity(count);
    for p in 0..count {
        // Imaginary axis from -iR to iR.
        let seg = integrate_c(
            |t| {
                let r = i * t;
                let (f, df) = h(r);
                (r / radius).powi(p as i32) * df / f * i
            },
            -radius,
            radius,
            tol,
        )?;
        // Arc from iR through -R to -iR.
        let arc = integrate_c(
            |theta| {
                let w = Complex64::from_polar(1.0, theta);
                let r = radius * w;
                let (f, df) = h(r);
                w.powi(p as i32) * df / f * i * r
            },
            0.5 * PI,
            1.5 * PI,
            tol,
        )?;
        out.push((seg + arc) / (2.0 * PI * i));
    }
    Ok(out)
}

/// Recovers `n` roots from scaled power sums through Newton's identities.
fn roots_from_moments(moments: &[Complex64], radius: f64, n: usize) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    // e_k from power sums p_k: k e_k = sum_{j=1}^k (-1)^{j-1} e_{k-j} p_j
    let mut e = vec![Complex64::new(1.0, 0.0)];
    for k in 1..=n {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 1..=k {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * e[k - j] * moments[j];
        }
        e.push(acc / k as f64);
    }
    // Monic polynomial prod (w - w_i) = sum (-1)^k e_k w^{n-k}
    let mut coeffs = vec![0.0; n + 1];
    for k in 0..=n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        coeffs[n - k] = sign * e[k].re;
    }
    let scaled = polynomial_roots(&coeffs)?;
    Ok(scaled.into_iter().map(|w| w * radius).collect())
}

/// The root system at `s = 0` obtained as the limit `s -> 0+`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitingRoots {
    pub side: Side,
    /// All `N` limiting roots; a vanishing `r_1` appears as `0`.
    pub roots: Vec<Complex64>,
    /// Whether `r_1(s) -> 0` on this side.
    pub vanishing: bool,
    /// `lim r_1(s) / s = 1 / |mu|` when `r_1` vanishes.
    pub slope: Option<f64>,
}

/// Limiting roots as `s -> 0+`. With `mu < 0` the negative-side `r_1` vanishes,
/// with `mu > 0` the positive-side one does.
pub fn limiting_roots(model: &LevyModel, side: Side) -> Result<LimitingRoots> {
    let mu = model
        .mean()
        .ok_or_else(|| Error::Precondition("the mean of X_1 is undefined".into()))?;
    if mu == 0.0 {
        return Err(Error::Unsupported("the limit s -> 0 is not available when the mean is zero".into()));
    }
    let expected = model.root_count(side).ok_or_else(|| {
        Error::Unsupported(format!("the {side} jump side is not matrix-exponential"))
    })?;
    let vanishing = side.sign() * mu > 0.0;
    let mut roots = if model.neg_jumps().is_me_or_none() && model.pos_jumps().is_me_or_none() {
        let (neg, pos) = bilateral_roots(model, 0.0)?;
        match side {
            Side::Negative => neg,
            Side::Positive => pos,
        }
    } else {
        half_plane_roots(model, 0.0, side, expected - usize::from(vanishing))?
    };
    if vanishing {
        roots.insert(0, Complex64::new(0.0, 0.0));
    }
    if roots.len() != expected {
        return Err(Error::RootFinding(format!(
            "found {} limiting roots on the {side} side but the case table requires {expected}",
            roots.len()
        )));
    }
    for r in roots.iter().filter(|r| r.norm() > 0.0) {
        let res = model.cumulant_unchecked(side.sign() * r).norm();
        if !(res < residual_tol(0.0)) {
            return Err(Error::RootFinding(format!("limiting root {r} has residual {res:e}")));
        }
    }
    sort_roots(&mut roots);
    Ok(LimitingRoots {
        side,
        roots,
        vanishing,
        slope: vanishing.then(|| 1.0 / mu.abs()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MeJumpSpec;
    use approx::assert_relative_eq;

    fn drift_exp(a: f64, lambda: f64) -> LevyModel {
        let neg = Jumps::Me(MeJumpSpec::exponential(Side::Negative, lambda, 1.0).unwrap());
        LevyModel::new(a, 0.0, neg, Jumps::None).unwrap()
    }

    #[test]
    fn polynomial_examples() {
        let bm = LevyModel::new(0.0, 2f64.sqrt(), Jumps::None, Jumps::None).unwrap();
        let p = cumulant_polynomial(&bm, 1.0).unwrap();
        assert_eq!(p.coeffs().len(), 3);
        assert_relative_eq!(p.coeffs()[0] / p.coeffs()[2], -1.0, max_relative = 1e-15);
        assert_eq!(p.coeffs()[1], 0.0);

        let m = drift_exp(1.0, 1.0);
        assert_eq!(cumulant_polynomial(&m, 1.0).unwrap().coeffs(), &[-1.0, -1.0, 1.0]);
        assert_eq!(cumulant_polynomial(&m, 2.0).unwrap().coeffs(), &[-2.0, -2.0, 1.0]);
    }

    #[test]
    fn golden_ratio_roots() {
        let m = drift_exp(1.0, 1.0);
        let neg = solve_roots(&m, 1.0, Side::Negative).unwrap();
        let pos = solve_roots(&m, 1.0, Side::Positive).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert_eq!(neg.count(), 1);
        assert_eq!(pos.count(), 1);
        assert_relative_eq!(neg.first().unwrap(), phi - 1.0, max_relative = 1e-14);
        assert_relative_eq!(pos.first().unwrap(), phi, max_relative = 1e-14);
    }

    #[test]
    fn brownian_roots() {
        let bm = LevyModel::new(0.0, 2f64.sqrt(), Jumps::None, Jumps::None).unwrap();
        let (neg, pos) = solve_all_roots(&bm, 1.0).unwrap();
        assert_relative_eq!(neg.first().unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(pos.first().unwrap(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn limiting_examples() {
        let m = drift_exp(1.0, 2.0);
        let neg = limiting_roots(&m, Side::Negative).unwrap();
        assert!(neg.vanishing);
        assert_eq!(neg.roots, vec![Complex64::new(0.0, 0.0)]);
        assert_eq!(neg.slope, Some(1.0));
        let pos = limiting_roots(&m, Side::Positive).unwrap();
        assert!(!pos.vanishing);
        assert_relative_eq!(pos.roots[0].re, 1.0, max_relative = 1e-13);

        let bm = LevyModel::new(-1.0, 2f64.sqrt(), Jumps::None, Jumps::None).unwrap();
        let pos = limiting_roots(&bm, Side::Positive).unwrap();
        assert_relative_eq!(pos.roots[0].re, 1.0, max_relative = 1e-13);
        assert!(limiting_roots(&drift_exp(1.0, 1.0), Side::Negative).is_err());
    }

    #[test]
    fn rejects_nonpositive_s() {
        assert!(solve_roots(&drift_exp(1.0, 1.0), 0.0, Side::Negative).is_err());
    }

    #[test]
    fn contour_route_matches_polynomial_route() {
        let m = crate::catalog::hyperexp_diffusion();
        for s in [0.01, 1.0, 7.0] {
            let (neg, pos) = bilateral_roots(&m, s).unwrap();
            for (side, want) in [(Side::Negative, neg), (Side::Positive, pos)] {
                let got = half_plane_roots(&m, s, side, want.len()).unwrap();
                for (a, b) in got.iter().zip(&want) {
                    assert!((a - b).norm() < 1e-8, "{side} {s}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn mixed_model_roots() {
        let m = crate::catalog::exp_general_pos();
        let set = solve_roots(&m, 1.0, Side::Negative).unwrap();
        assert_eq!(set.count(), 2);
        assert!(set.first().unwrap() > 0.0 && set.first().unwrap() < 1.0);
        assert!(solve_roots(&m, 1.0, Side::Positive).is_err());
        let lim = limiting_roots(&m, Side::Negative).unwrap();
        assert!(lim.vanishing);
        assert_eq!(lim.roots.len(), 2);
    }
}

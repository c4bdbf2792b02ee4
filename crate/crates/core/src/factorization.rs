//! Wiener-Hopf factorization components: laws of the killed extrema
//! `X^-_{theta_s}` and `X^+_{theta_s}`, the moment generating function of the
//! extremum on the opposite side of the ME jumps, and the `s -> 0` limits.
//!
//! A component for the negative side has density `q e^{R x} e` on `x < 0`
//! with `R = (0 -I; rho)`, eigenvalues `r_i`. A positive-side component is the
//! negative-side component of the dual process `-X` with `R` negated.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::invert::{euler_inversion, EulerParams};
use crate::linalg::{self, companion_negative, expm, unit_last};
use crate::model::{Case, Jumps, LevyModel, Side};
use crate::numeric::{coerce_real, coerce_real_vec, elementary_symmetric};
use crate::quad::{integrate_vec, integrate_vec_to_inf, Tolerance};
use crate::roots::{limiting_roots, solve_roots, NEAR_MULTIPLE_TOL};

/// Elementary symmetric polynomials `e_1..e_n` of `values`.
pub fn symmetric_coefficients(values: &[Complex64]) -> Vec<Complex64> {
    elementary_symmetric(values)
}

/// Elementary symmetric polynomials of a conjugation-closed set, coerced to real.
pub fn symmetric_coefficients_real(values: &[Complex64]) -> Result<Vec<f64>> {
    coerce_real_vec(&elementary_symmetric(values), "symmetric function")
}

/// How the component is scaled.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    /// Law of the extremum at killing rate `s` (`s = 0` for a proper
    /// absolute extremum built from non-vanishing limiting roots).
    Killed,
    /// `lim s^{-1}` of the killed quantities on the side whose `r_1` vanishes.
    Limit { mean: f64 },
}

/// One Wiener-Hopf factor with ME structure.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationComponent {
    side: Side,
    s: f64,
    limit: bool,
    case: Case,
    roots: Vec<Complex64>,
    near_multiple: bool,
    beta: Vec<f64>,
    rho: Vec<f64>,
    r: DMatrix<f64>,
    q: Vec<f64>,
    atom: f64,
    creep: f64,
}

/// Builds the component of `X^{side}_{theta_s}` for `s > 0`.
pub fn build_component(model: &LevyModel, s: f64, side: Side) -> Result<FactorizationComponent> {
    match side {
        Side::Negative => {
            let roots = solve_roots(model, s, Side::Negative)?;
            negative_component(model, s, &roots.roots, roots.near_multiple, Mode::Killed)
        }
        Side::Positive => Ok(build_component(&model.mirrored(), s, Side::Negative)?.mirror()),
    }
}

/// Builds a component from given roots of the negative side of `model`.
fn negative_component(
    model: &LevyModel,
    s: f64,
    roots: &[Complex64],
    near_multiple: bool,
    mode: Mode,
) -> Result<FactorizationComponent> {
    let case = model.case(Side::Negative);
    let (beta, beta_d) = match model.neg_jumps() {
        Jumps::None => (Vec::new(), 1.0),
        Jumps::Me(spec) => (spec.denominator().to_vec(), spec.denominator()[0]),
        Jumps::General(_) => {
            return Err(Error::Unsupported("the negative jump side is not matrix-exponential".into()))
        }
    };
    let d = beta.len();
    let expected = match case {
        Case::NonStepwise => d + 1,
        Case::Stepwise => d,
    };
    if roots.len() != expected {
        return Err(Error::Consistency(format!(
            "{} roots supplied for a {case} side with d = {d}",
            roots.len()
        )));
    }
    let mut rho = symmetric_coefficients_real(roots)?;
    rho.reverse();
    let scale = match mode {
        Mode::Killed => rho.first().copied().unwrap_or(1.0) / beta_d,
        Mode::Limit { mean } => {
            let rest: Complex64 = roots[1..].iter().product();
            coerce_real(rest, "product of limiting roots")? / (mean.abs() * beta_d)
        }
    };
    let (q, atom, creep) = match case {
        Case::NonStepwise => {
            let mut q: Vec<f64> = beta.iter().map(|b| scale * b).collect();
            q.push(scale);
            let creep = 0.5 * model.sigma() * model.sigma() * scale;
            (q, 0.0, creep)
        }
        Case::Stepwise => {
            let q = beta.iter().zip(&rho).map(|(b, p)| scale * (b - p)).collect();
            (q, scale, model.drift().max(0.0) * scale)
        }
    };
    Ok(FactorizationComponent {
        side: Side::Negative,
        s,
        limit: matches!(mode, Mode::Limit { .. }),
        case,
        roots: roots.to_vec(),
        near_multiple,
        beta,
        r: companion_negative(&rho),
        rho,
        q,
        atom,
        creep,
    })
}

impl FactorizationComponent {
    /// The same component viewed on the dual process: `x -> -x`.
    pub fn mirror(mut self) -> FactorizationComponent {
        self.side = self.side.opposite();
        self.r = -self.r;
        self
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Whether this is the `s^{-1}`-scaled limit of a vanishing side.
    pub fn is_limit(&self) -> bool {
        self.limit
    }

    pub fn case(&self) -> Case {
        self.case
    }

    /// Roots `r_i` (positive real part, or zero for a vanishing limit root).
    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    pub fn count(&self) -> usize {
        self.roots.len()
    }

    pub fn near_multiple(&self) -> bool {
        self.near_multiple
    }

    /// `(beta_d, ..., beta_1)`.
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// `(rho_N, ..., rho_1)`.
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn r_matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// `p = P{X = 0}` (or its scaled limit).
    pub fn atom(&self) -> f64 {
        self.atom
    }

    /// Creep constant `A_*` (or its scaled limit).
    pub fn creep(&self) -> f64 {
        self.creep
    }

    /// Eigenvalues of `R`: `r_i` for the negative side, `-r_i` for the positive.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let sign = -self.side.sign();
        self.roots.iter().map(|r| sign * r).collect()
    }

    fn on_support(&self, x: f64) -> bool {
        match self.side {
            Side::Negative => x < 0.0,
            Side::Positive => x > 0.0,
        }
    }

    /// Density `q e^{R x} e` on the component's half-axis, zero elsewhere.
    pub fn density(&self, x: f64) -> f64 {
        if !self.on_support(x) || self.q.is_empty() {
            return 0.0;
        }
        linalg::quad_form_exp(&self.q, &self.r, x)
    }

    /// `d/dx` of the density.
    pub fn density_derivative(&self, x: f64) -> f64 {
        if !self.on_support(x) || self.q.is_empty() {
            return 0.0;
        }
        let n = self.q.len();
        let v = &self.r * expm(&(&self.r * x)) * unit_last(n);
        (0..n).map(|j| self.q[j] * v[j]).sum()
    }

    fn q_row(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.q)
    }

    /// `P{X < x}`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if self.limit {
            return Err(Error::Unsupported("the scaled limit component is not a probability law".into()));
        }
        let n = self.q.len();
        match self.side {
            Side::Negative => {
                if x > 0.0 {
                    return Ok(1.0);
                }
                if x == 0.0 {
                    return Ok(1.0 - self.atom);
                }
                if n == 0 {
                    return Ok(0.0);
                }
                let y = self.solve_r(&(expm(&(&self.r * x)) * unit_last(n)))?;
                Ok(self.q_row().dot(&y))
            }
            Side::Positive => {
                if x <= 0.0 {
                    return Ok(0.0);
                }
                if n == 0 {
                    return Ok(self.atom);
                }
                let e = unit_last(n);
                let w = expm(&(&self.r * x)) * &e - &e;
                let y = self.solve_r(&w)?;
                Ok(self.atom + self.q_row().dot(&y))
            }
        }
    }

    fn solve_r(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.r
            .clone()
            .lu()
            .solve(b)
            .ok_or_else(|| Error::Numerical("singular companion matrix".into()))
    }

    /// Mass of the absolutely continuous part, `int density`.
    pub fn density_mass(&self) -> Result<f64> {
        let n = self.q.len();
        if n == 0 {
            return Ok(0.0);
        }
        let y = self.solve_r(&unit_last(n))?;
        Ok(-self.side.sign() * self.q_row().dot(&y))
    }

    fn check_pole(&self, r: Complex64) -> Result<()> {
        for root in &self.roots {
            let pole = self.side.sign() * root;
            if (r - pole).norm() <= 1e-12 * (1.0 + root.norm()) {
                return Err(Error::OutsideDomain(format!("r = {r} is a pole of the extremum transform")));
            }
        }
        Ok(())
    }

    /// `E e^{r X}` in matrix form: `p + q (rI + R)^{-1} e` on the negative side
    /// and `p - q (rI + R)^{-1} e` on the positive side. Exactly 1 at `r = 0`.
    pub fn mgf(&self, r: Complex64) -> Result<Complex64> {
        if r == Complex64::new(0.0, 0.0) && !self.limit {
            return Ok(Complex64::new(1.0, 0.0));
        }
        self.check_pole(r)?;
        let n = self.q.len();
        if n == 0 {
            return Ok(Complex64::new(self.atom, 0.0));
        }
        let y = linalg::solve_shifted(&self.r, r, &unit_last(n))?;
        let qy: Complex64 = self.q.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
        Ok(self.atom - self.side.sign() * qy)
    }

    /// `E e^{r X}` in product form over roots and rates.
    pub fn mgf_product(&self, r: Complex64, rates: &[Complex64]) -> Result<Complex64> {
        if self.limit {
            return Err(Error::Unsupported("product form applies to killed laws only".into()));
        }
        self.check_pole(r)?;
        let z = -self.side.sign() * r;
        let mut value = Complex64::new(1.0, 0.0);
        for root in &self.roots {
            value *= root / (z + root);
        }
        for b in rates {
            value *= (z + b) / b;
        }
        Ok(value)
    }

    /// Eigen-structure of `R` when the roots are well separated: eigenvalues
    /// and `V, V^{-1} e` with `V_{ki} = (-r_i)^k`.
    pub(crate) fn spectral(&self) -> Option<Spectral> {
        let n = self.roots.len();
        if n == 0 || self.near_multiple || has_close_pair(&self.roots) {
            return None;
        }
        let v = DMatrix::from_fn(n, n, |k, i| (-self.roots[i]).powi(k as i32));
        let e = DVector::from_fn(n, |k, _| if k == n - 1 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) });
        let vinv_e = v.clone().lu().solve(&e)?;
        if vinv_e.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return None;
        }
        Some(Spectral {
            eig: self.eigenvalues(),
            v,
            vinv_e,
        })
    }
}

fn has_close_pair(roots: &[Complex64]) -> bool {
    roots
        .iter()
        .enumerate()
        .any(|(i, a)| roots[i + 1..].iter().any(|b| (a - b).norm() < NEAR_MULTIPLE_TOL))
}

#[derive(Debug, Clone)]
pub(crate) struct Spectral {
    pub(crate) eig: Vec<Complex64>,
    pub(crate) v: DMatrix<Complex64>,
    pub(crate) vinv_e: DVector<Complex64>,
}

impl Spectral {
    /// `f(R) e` via `V diag(f(lambda_i)) V^{-1} e`.
    fn apply<F: Fn(Complex64) -> Complex64>(&self, f: F) -> DVector<Complex64> {
        let weighted = DVector::from_fn(self.eig.len(), |i, _| f(self.eig[i]) * self.vinv_e[i]);
        &self.v * weighted
    }
}

/// Route for the matrix tail transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailRoute {
    /// Eigen-decomposition when roots are separated, quadrature otherwise.
    Auto,
    Eigen,
    Quadrature,
}

/// The vector `Pi~(-R) e` where `Pi~` is the tail transform of `jumps` (on the
/// side opposite to `comp`) and `R` the component matrix.
pub fn matrix_tail_transform(
    jumps: &Jumps,
    comp: &FactorizationComponent,
    route: TailRoute,
) -> Result<DVector<f64>> {
    let n = comp.count();
    if matches!(jumps, Jumps::None) || n == 0 {
        return Ok(DVector::zeros(n));
    }
    let spectral = match route {
        TailRoute::Quadrature => None,
        TailRoute::Auto => comp.spectral(),
        TailRoute::Eigen => Some(comp.spectral().ok_or_else(|| {
            Error::Numerical("eigen route requested for near-multiple roots".into())
        })?),
    };
    if let Some(sp) = spectral {
        let v = sp.apply(|lambda| jumps.transform_unchecked(-lambda));
        return coerce_real_vec(v.as_slice(), "matrix tail transform").map(DVector::from_vec);
    }
    tail_transform_quadrature(jumps, comp)
}

/// `int_0^inf e^{-sigma R y} e tail(sigma y) dy`, `sigma` the side of `jumps`.
fn tail_transform_quadrature(jumps: &Jumps, comp: &FactorizationComponent) -> Result<DVector<f64>> {
    let n = comp.count();
    let sigma = comp.side().opposite().sign();
    let decay = comp.roots().iter().map(|r| r.re).filter(|x| *x > 0.0).fold(f64::INFINITY, f64::min);
    let scale = jumps.length_scale().min(if decay.is_finite() { 1.0 / decay } else { f64::INFINITY });
    let e = unit_last(n);
    let m = -sigma * comp.r_matrix();
    let tol = Tolerance {
        abs: 1e-13,
        rel: 1e-12,
        max_intervals: 20_000,
    };
    let f = |y: f64| {
        let t = jumps.tail(sigma * y);
        if t == 0.0 {
            return vec![0.0; n];
        }
        let col = expm(&(&m * y)) * &e;
        col.iter().map(|c| c * t).collect()
    };
    let mut lo = 0.0;
    let mut total = DVector::zeros(n);
    for &b in jumps.breakpoints() {
        total += DVector::from_vec(integrate_vec(f, lo, b, n, tol)?);
        lo = b;
    }
    total += DVector::from_vec(integrate_vec_to_inf(f, lo, scale, n, tol)?);
    Ok(total)
}

/// Law of the extremum on the side opposite to an ME component, through its
/// moment generating function (or its `s -> 0` limit).
#[derive(Debug, Clone)]
pub struct OppositeExtremum {
    side: Side,
    comp: FactorizationComponent,
    jumps: Jumps,
    tail_vec: DVector<f64>,
    spectral: Option<Spectral>,
    discount: f64,
    atom: f64,
}

/// `E e^{r X^{side}_{theta_s}}` assembled from the component on the other side.
/// For `side = +` the negative jumps must be ME; for `side = -` the positive.
pub fn opposite_extremum(model: &LevyModel, s: f64, side: Side) -> Result<OppositeExtremum> {
    match side {
        Side::Positive => {
            let comp = build_component(model, s, Side::Negative)?;
            OppositeExtremum::new(model, comp, s, Side::Positive)
        }
        Side::Negative => {
            let dual = model.mirrored();
            let comp = build_component(&dual, s, Side::Negative)?;
            OppositeExtremum::new(&dual, comp, s, Side::Negative)
        }
    }
}

/// Convenience wrapper: `E e^{r X^{side}_{theta_s}}`.
pub fn opposite_mgf(model: &LevyModel, s: f64, side: Side, r: Complex64) -> Result<Complex64> {
    opposite_extremum(model, s, side)?.mgf(r)
}

impl OppositeExtremum {
    /// `model` is in canonical orientation: `comp` is its negative-side
    /// component and the extremum computed is its supremum.
    fn new(model: &LevyModel, comp: FactorizationComponent, discount: f64, side: Side) -> Result<Self> {
        if model.variance_finite() == Some(false) {
            return Err(Error::Precondition("the variance of X_1 is infinite".into()));
        }
        if model.variance_finite().is_none() {
            log::warn!("finite variance of X_1 cannot be verified for general jumps; proceeding");
        }
        let jumps = model.pos_jumps().clone();
        let tail_vec = matrix_tail_transform(&jumps, &comp, TailRoute::Auto)?;
        let spectral = comp.spectral();
        let atom = if model.case(Side::Positive) == Case::Stepwise {
            let qt: f64 = comp.q().iter().zip(tail_vec.iter()).map(|(a, b)| a * b).sum();
            discount / (discount + comp.atom() * jumps.intensity() + qt)
        } else {
            0.0
        };
        Ok(OppositeExtremum {
            side,
            comp,
            jumps,
            tail_vec,
            spectral,
            discount,
            atom,
        })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    /// Same-side component used in the construction (canonical orientation).
    pub fn component(&self) -> &FactorizationComponent {
        &self.comp
    }

    /// `P{X = 0}`.
    pub fn atom(&self) -> f64 {
        self.atom
    }

    /// `int_0^inf e^{rx} int_{-inf}^0 tail(x - y) dP(y)` for the canonical
    /// supremum.
    fn convolution_term(&self, r: Complex64) -> Result<Complex64> {
        if matches!(self.jumps, Jumps::None) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let pt = self.jumps.transform(r)?;
        let mut total = self.comp.atom() * pt;
        let n = self.comp.count();
        if n == 0 {
            return Ok(total);
        }
        let g: DVector<Complex64> = match &self.spectral {
            Some(sp) => sp.apply(|lambda| {
                let denom = r + lambda;
                if denom.norm() < 1e-6 * (1.0 + lambda.norm()) {
                    self.jumps.transform_derivative(r)
                } else {
                    (pt - self.jumps.transform_unchecked(-lambda)) / denom
                }
            }),
            None => {
                let rhs = DVector::from_fn(n, |k, _| {
                    let e = if k == n - 1 { pt } else { Complex64::new(0.0, 0.0) };
                    e - self.tail_vec[k]
                });
                linalg::solve_shifted_c(self.comp.r_matrix(), r, &rhs)?
            }
        };
        total += self.comp.q().iter().zip(g.iter()).map(|(a, b)| a * b).sum::<Complex64>();
        Ok(total)
    }

    fn canonical_mgf(&self, r: Complex64) -> Result<Complex64> {
        if r == Complex64::new(0.0, 0.0) {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let j = self.convolution_term(r)?;
        Ok(1.0 / (1.0 - r / self.discount * (self.comp.creep() + j)))
    }

    /// `E e^{r X}` for the extremum; exactly 1 at `r = 0`.
    pub fn mgf(&self, r: Complex64) -> Result<Complex64> {
        match self.side {
            Side::Positive => self.canonical_mgf(r),
            Side::Negative => self.canonical_mgf(-r),
        }
    }

    /// `P{|X| <= t}` of the canonical supremum by Euler inversion.
    fn canonical_cdf(&self, t: f64) -> f64 {
        euler_inversion(
            |p| self.canonical_mgf(-p).unwrap_or(Complex64::new(f64::NAN, 0.0)) / p,
            t,
            EulerParams::default(),
        )
        .clamp(0.0, 1.0)
    }

    fn canonical_density(&self, t: f64) -> f64 {
        euler_inversion(
            |p| self.canonical_mgf(-p).unwrap_or(Complex64::new(f64::NAN, 0.0)) - self.atom,
            t,
            EulerParams::default(),
        )
    }

    /// `P{X < x}` by numerical transform inversion.
    pub fn cdf(&self, x: f64) -> f64 {
        match self.side {
            Side::Positive => {
                if x <= 0.0 {
                    0.0
                } else {
                    self.canonical_cdf(x)
                }
            }
            Side::Negative => {
                if x > 0.0 {
                    1.0
                } else if x == 0.0 {
                    1.0 - self.atom
                } else {
                    1.0 - self.canonical_cdf(-x)
                }
            }
        }
    }

    /// Density of the absolutely continuous part by numerical inversion.
    pub fn density(&self, x: f64) -> f64 {
        let t = self.side.sign() * x;
        if t <= 0.0 {
            0.0
        } else {
            self.canonical_density(t)
        }
    }
}

/// The law of an extremum: exact ME form or transform-inverted.
#[derive(Debug, Clone)]
pub enum ExtremumLaw {
    Matrix(FactorizationComponent),
    Transform(OppositeExtremum),
}

impl ExtremumLaw {
    /// Law of `X^{side}_{theta_s}` by whichever route the model supports.
    pub fn killed(model: &LevyModel, s: f64, side: Side) -> Result<ExtremumLaw> {
        if model.jumps(side).is_me_or_none() {
            Ok(ExtremumLaw::Matrix(build_component(model, s, side)?))
        } else {
            Ok(ExtremumLaw::Transform(opposite_extremum(model, s, side)?))
        }
    }

    pub fn side(&self) -> Side {
        match self {
            ExtremumLaw::Matrix(c) => c.side(),
            ExtremumLaw::Transform(t) => t.side(),
        }
    }

    pub fn atom(&self) -> f64 {
        match self {
            ExtremumLaw::Matrix(c) => c.atom(),
            ExtremumLaw::Transform(t) => t.atom(),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match self {
            ExtremumLaw::Matrix(c) => c.density(x),
            ExtremumLaw::Transform(t) => t.density(x),
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        match self {
            ExtremumLaw::Matrix(c) => c.cdf(x),
            ExtremumLaw::Transform(t) => Ok(t.cdf(x)),
        }
    }

    pub fn mgf(&self, r: Complex64) -> Result<Complex64> {
        match self {
            ExtremumLaw::Matrix(c) => c.mgf(r),
            ExtremumLaw::Transform(t) => t.mgf(r),
        }
    }

    /// Whether density and cdf are exact (matrix form) rather than inverted.
    pub fn is_exact(&self) -> bool {
        matches!(self, ExtremumLaw::Matrix(_))
    }
}

/// Absolute extremum `X^+ = sup_t X_t` (for `mu < 0`) or `X^- = inf_t X_t`
/// (for `mu > 0`), with the scaled limit component of the vanishing side.
#[derive(Debug, Clone)]
pub struct AbsoluteExtremum {
    /// Side of the proper extremum.
    pub side: Side,
    pub mean: f64,
    /// `q'`, `p'`, `A'` and `R(0)` of the vanishing side, when that side is ME.
    pub limit: Option<FactorizationComponent>,
    pub law: ExtremumLaw,
}

/// Builds the absolute extremum law for `mu != 0`.
pub fn absolute_extremum(model: &LevyModel) -> Result<AbsoluteExtremum> {
    let mean = model
        .mean()
        .ok_or_else(|| Error::Precondition("the mean of X_1 is undefined".into()))?;
    if mean == 0.0 {
        return Err(Error::Precondition("the absolute extremum is degenerate when the mean is zero".into()));
    }
    if mean > 0.0 {
        let dual = absolute_extremum(&model.mirrored())?;
        let law = match dual.law {
            ExtremumLaw::Matrix(c) => ExtremumLaw::Matrix(c.mirror()),
            ExtremumLaw::Transform(mut t) => {
                t.side = Side::Negative;
                ExtremumLaw::Transform(t)
            }
        };
        return Ok(AbsoluteExtremum {
            side: Side::Negative,
            mean,
            limit: dual.limit.map(FactorizationComponent::mirror),
            law,
        });
    }
    let limit = if model.neg_jumps().is_me_or_none() {
        Some(limit_component(model)?)
    } else {
        None
    };
    let law = if model.pos_jumps().is_me_or_none() {
        let lim = limiting_roots(&model.mirrored(), Side::Negative)?;
        let near = has_close_pair(&lim.roots);
        let comp = negative_component(&model.mirrored(), 0.0, &lim.roots, near, Mode::Killed)?;
        ExtremumLaw::Matrix(comp.mirror())
    } else {
        let comp = limit.clone().expect("negative side is ME when the positive side is general");
        ExtremumLaw::Transform(OppositeExtremum::new(model, comp, 1.0, Side::Positive)?)
    };
    Ok(AbsoluteExtremum {
        side: Side::Positive,
        mean,
        limit,
        law,
    })
}

/// `lim_{s -> 0} s^{-1}` of the negative-side component when `mu < 0`.
pub fn limit_component(model: &LevyModel) -> Result<FactorizationComponent> {
    let lim = limiting_roots(model, Side::Negative)?;
    if !lim.vanishing {
        return Err(Error::Precondition("the negative-side limit requires a negative mean".into()));
    }
    let mean = model.mean().expect("checked by limiting_roots");
    let near = has_close_pair(&lim.roots);
    negative_component(model, 0.0, &lim.roots, near, Mode::Limit { mean })
}

/// `E e^{r X^+}` of the absolute supremum from the limit component,
/// for `mu < 0` with ME negative jumps.
pub fn absolute_supremum_mgf(model: &LevyModel, r: Complex64) -> Result<Complex64> {
    let comp = limit_component(model)?;
    OppositeExtremum::new(model, comp, 1.0, Side::Positive)?.mgf(r)
}

/// `|E e^{rX^+} E e^{rX^-} - s / (s - k(r))|`, with the ME-side component
/// and the opposite-side transform.
pub fn wiener_hopf_residual(model: &LevyModel, s: f64, r: Complex64) -> Result<f64> {
    let target = s / (s - model.cumulant(r)?);
    let product = if model.neg_jumps().is_me_or_none() {
        build_component(model, s, Side::Negative)?.mgf(r)? * opposite_mgf(model, s, Side::Positive, r)?
    } else {
        build_component(model, s, Side::Positive)?.mgf(r)? * opposite_mgf(model, s, Side::Negative, r)?
    };
    Ok((product - target).norm())
}

/// Residual using the two ME components; both jump sides must be ME or absent.
pub fn wiener_hopf_residual_components(model: &LevyModel, s: f64, r: Complex64) -> Result<f64> {
    let target = s / (s - model.cumulant(r)?);
    let product = build_component(model, s, Side::Negative)?.mgf(r)? * build_component(model, s, Side::Positive)?.mgf(r)?;
    Ok((product - target).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use approx::assert_relative_eq;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn symmetric_examples() {
        assert_eq!(symmetric_coefficients_real(&[c(1.0), c(2.0)]).unwrap(), vec![3.0, 2.0]);
        let v = symmetric_coefficients_real(&[Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)]).unwrap();
        assert_eq!(v, vec![0.0, 1.0]);
    }

    #[test]
    fn stepwise_exponential_example() {
        let m = catalog::drift_exp();
        let comp = build_component(&m, 1.0, Side::Negative).unwrap();
        let r1 = (5f64.sqrt() - 1.0) / 2.0;
        assert_relative_eq!(comp.atom(), r1, max_relative = 1e-14);
        for x in [-0.1, -1.0, -4.0] {
            assert_relative_eq!(comp.density(x), r1 * (1.0 - r1) * (r1 * x).exp(), max_relative = 1e-12);
        }
        assert_relative_eq!(comp.atom() + comp.density_mass().unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(comp.mgf(c(1.0)).unwrap().re, r1 * 2.0 / (1.0 + r1), max_relative = 1e-14);
        assert_eq!(comp.mgf(c(0.0)).unwrap(), c(1.0));
    }

    #[test]
    fn brownian_infimum_is_exponential() {
        let m = catalog::brownian();
        let comp = build_component(&m, 1.0, Side::Negative).unwrap();
        assert_eq!(comp.atom(), 0.0);
        assert_relative_eq!(comp.density(-0.5), (-0.5f64).exp(), max_relative = 1e-13);
        assert_relative_eq!(comp.cdf(-1e-300).unwrap(), 1.0, max_relative = 1e-13);
        let m2 = opposite_mgf(&m, 1.0, Side::Positive, c(0.5)).unwrap();
        assert_relative_eq!(m2.re, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn spectrally_negative_supremum_is_exponential() {
        let m = catalog::drift_exp();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let ext = opposite_extremum(&m, 1.0, Side::Positive).unwrap();
        assert_relative_eq!(ext.component().creep(), phi - 1.0, max_relative = 1e-14);
        for r in [-3.0, -0.5, 0.7, 1.5] {
            assert_relative_eq!(ext.mgf(c(r)).unwrap().re, phi / (phi - r), max_relative = 1e-12);
        }
        assert_relative_eq!(ext.cdf(1.0), 1.0 - (-phi).exp(), epsilon = 1e-7);
    }

    #[test]
    fn tail_transform_routes_agree() {
        // Scalar example: Pi+(z) = 1/(2 - z), R = 0.5 -> 0.4
        let pos = Jumps::Me(crate::model::MeJumpSpec::exponential(Side::Positive, 1.0, 2.0).unwrap());
        let m = LevyModel::new(0.1, 1.0, Jumps::None, pos.clone()).unwrap();
        let comp = build_component(&m, 1.0, Side::Negative).unwrap();
        let eig = matrix_tail_transform(&pos, &comp, TailRoute::Eigen).unwrap();
        let quad = matrix_tail_transform(&pos, &comp, TailRoute::Quadrature).unwrap();
        let want = 1.0 / (2.0 + comp.roots()[0].re);
        assert_relative_eq!(eig[0], want, max_relative = 1e-13);
        assert_relative_eq!(quad[0], want, max_relative = 1e-9);
    }

    #[test]
    fn duality_of_components() {
        let m = catalog::hyperexp_diffusion();
        let plus = build_component(&m, 0.7, Side::Positive).unwrap();
        let dual = build_component(&m.mirrored(), 0.7, Side::Negative).unwrap();
        assert_eq!(plus.q(), dual.q());
        assert_eq!(plus.atom(), dual.atom());
        for x in [0.2, 1.0, 3.0] {
            assert_relative_eq!(plus.density(x), dual.density(-x), max_relative = 1e-12);
        }
    }

    #[test]
    fn absolute_supremum_of_spectrally_negative_model() {
        let neg = Jumps::Me(crate::model::MeJumpSpec::exponential(Side::Negative, 2.0, 1.0).unwrap());
        let m = LevyModel::new(1.0, 0.0, neg, Jumps::None).unwrap();
        let abs = absolute_extremum(&m).unwrap();
        let lim = abs.limit.as_ref().unwrap();
        assert_relative_eq!(lim.atom(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(1.0 - abs.law.cdf(1.0).unwrap(), (-1.0f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(absolute_supremum_mgf(&m, c(0.5)).unwrap().re, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn wiener_hopf_small_examples() {
        let bm = catalog::brownian();
        assert!(wiener_hopf_residual(&bm, 1.0, Complex64::new(0.0, 1.0)).unwrap() < 1e-10);
        let m = catalog::drift_exp();
        assert!(wiener_hopf_residual(&m, 1.0, Complex64::new(0.0, 2.0)).unwrap() < 1e-8);
        assert_eq!(wiener_hopf_residual(&m, 1.0, c(0.0)).unwrap(), 0.0);
    }
}

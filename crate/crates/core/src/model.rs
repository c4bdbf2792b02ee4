//! Lévy models with matrix-exponential (ME) jump measures: jump specifications,
//! densities, tails and tail transforms, the cumulant function, and the
//! per-side case classification.
//!
//! Conventions used throughout the crate:
//!
//! * An ME jump law is given by the transform of its magnitude `|J|`,
//!   `E e^{-z|J|} = N(z) / D(z)` with `D` monic of degree `d`. Coefficients are
//!   stored in ascending powers of `z`, so `numerator[0]` is the constant term.
//! * The rates (`b_i` for negative jumps, `c_i` for positive jumps) are the
//!   negated roots of `D`, listed with multiplicity.
//! * Tails are `Pi(x, inf)` for `x > 0` and `Pi(-inf, x)` for `x < 0`, and the
//!   tail transform is `int e^{r x} tail(x) dx` over the jump half-line.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::numeric::geometric_grid;
use crate::poly::{poly_from_roots, Poly};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Negative,
    Positive,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Negative => -1.0,
            Side::Positive => 1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Negative => Side::Positive,
            Side::Positive => Side::Negative,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Side::Negative => "-",
            Side::Positive => "+",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Regime of one side of the process: non-step-wise `(NS)` or step-wise `(S)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    NonStepwise,
    Stepwise,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Case::NonStepwise => f.write_str("NS"),
            Case::Stepwise => f.write_str("S"),
        }
    }
}

/// One block of the partial-fraction expansion of an ME density:
/// `sum_j coeffs[j] u^j e^{-rate u}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFraction {
    pub rate: Complex64,
    pub coeffs: Vec<Complex64>,
}

/// A component of an Erlang mixture: `weight * Erlang(shape, rate)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErlangComponent {
    pub weight: f64,
    pub shape: usize,
    pub rate: f64,
}

/// One-sided matrix-exponential jump measure with total mass `intensity`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeJumpSpec {
    side: Side,
    intensity: f64,
    numerator: Vec<f64>,
    denominator: Vec<f64>,
    rates: Vec<Complex64>,
    fractions: Vec<PartialFraction>,
    erlang: Option<Vec<ErlangComponent>>,
    tt_num: Poly,
    tt_den: Poly,
}

const NONNEG_TOL: f64 = -1e-12;
const CLUSTER_RADIUS: f64 = 3e-2;

impl MeJumpSpec {
    /// Builds an ME jump measure from the transform coefficients of the jump
    /// magnitude (ascending powers, monic denominator implied).
    pub fn new(side: Side, intensity: f64, numerator: &[f64], denominator: &[f64]) -> Result<Self> {
        let d = denominator.len();
        if d == 0 {
            return Err(Error::InvalidJumpSpec("denominator must have degree >= 1".into()));
        }
        if numerator.len() > d {
            return Err(Error::InvalidJumpSpec(format!(
                "numerator has {} coefficients but the denominator degree is {d}",
                numerator.len()
            )));
        }
        if !(intensity.is_finite() && intensity >= 0.0) {
            return Err(Error::InvalidJumpSpec(format!(
                "intensity must be finite and nonnegative (got {intensity})"
            )));
        }
        if numerator.iter().chain(denominator).any(|c| !c.is_finite()) {
            return Err(Error::InvalidJumpSpec("coefficients must be finite".into()));
        }
        let mut num = numerator.to_vec();
        num.resize(d, 0.0);
        let den = denominator.to_vec();
        if den[0] == 0.0 {
            return Err(Error::NonPositiveRate("0".into()));
        }
        let at_zero = num[0] / den[0];
        if (at_zero - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidJumpSpec(format!(
                "transform at 0 must equal 1 (got {at_zero})"
            )));
        }
        // Normalize so that N(0) = D(0) holds exactly (idempotent).
        let scale = den[0] / num[0];
        for c in num.iter_mut().skip(1) {
            *c *= scale;
        }
        num[0] = den[0];

        let den_poly = Poly::monic(&den);
        let raw_roots = den_poly.roots()?;
        let mut rates: Vec<Complex64> = raw_roots.iter().map(|z| -z).collect();
        for b in &rates {
            if b.re <= 0.0 {
                return Err(Error::NonPositiveRate(format!("{b}")));
            }
        }
        let clusters = cluster_rates(&mut rates, &den_poly);
        rates.sort_by(|a, b| {
            a.re.total_cmp(&b.re)
                .then(a.im.abs().total_cmp(&b.im.abs()))
                .then(a.im.total_cmp(&b.im))
        });

        // The slowest rate must be real; Erlang laws make it multiple.
        let slowest = clusters
            .iter()
            .min_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.abs().total_cmp(&b.0.im.abs())))
            .expect("at least one rate");
        if slowest.0.im != 0.0 {
            return Err(Error::InvalidJumpSpec(format!(
                "the rate with smallest real part must be real (got {})",
                slowest.0
            )));
        }
        if clusters
            .iter()
            .any(|(b, _)| b.im != 0.0 && b.re < slowest.0.re)
        {
            return Err(Error::InvalidJumpSpec("a complex rate precedes the real dominant rate".into()));
        }

        let num_poly = Poly::new(num.clone());
        let fractions = partial_fractions(&num_poly, &clusters);
        let erlang = erlang_mixture(&fractions);

        let (tt_num, tt_den) = match side {
            Side::Negative => (den_poly.sub(&num_poly).shift_down(), den_poly.clone()),
            Side::Positive => (
                num_poly.reflect().sub(&den_poly.reflect()).shift_down(),
                den_poly.reflect(),
            ),
        };

        let spec = MeJumpSpec {
            side,
            intensity,
            numerator: num,
            denominator: den,
            rates,
            fractions,
            erlang,
            tt_num,
            tt_den,
        };
        spec.validate_density()?;
        Ok(spec)
    }

    /// Exponential jumps with the given rate.
    pub fn exponential(side: Side, intensity: f64, rate: f64) -> Result<Self> {
        MeJumpSpec::new(side, intensity, &[rate], &[rate])
    }

    /// Erlang jumps with `shape` phases of the given rate.
    pub fn erlang(side: Side, intensity: f64, shape: usize, rate: f64) -> Result<Self> {
        let den = Poly::new(vec![rate, 1.0]);
        let full = (1..shape).fold(den.clone(), |acc, _| acc.mul(&den));
        let mut lower = full.coeffs()[..shape].to_vec();
        let mut num = vec![0.0; shape];
        num[0] = rate.powi(shape as i32);
        lower.truncate(shape);
        MeJumpSpec::new(side, intensity, &num, &lower)
    }

    /// Hyperexponential jumps: mixture of exponentials with the given weights.
    pub fn hyperexponential(side: Side, intensity: f64, weights: &[f64], rates: &[f64]) -> Result<Self> {
        if weights.len() != rates.len() || weights.is_empty() {
            return Err(Error::InvalidJumpSpec("weights and rates must have equal, nonzero length".into()));
        }
        let mut num = Poly::constant(0.0);
        let mut den = Poly::constant(1.0);
        for (i, (&w, &c)) in weights.iter().zip(rates).enumerate() {
            let mut term = Poly::constant(w * c);
            for (j, &c2) in rates.iter().enumerate() {
                if j != i {
                    term = term.mul(&Poly::new(vec![c2, 1.0]));
                }
            }
            num = num.add(&term);
            den = den.mul(&Poly::new(vec![c, 1.0]));
        }
        let d = rates.len();
        let mut n = num.coeffs().to_vec();
        n.resize(d, 0.0);
        MeJumpSpec::new(side, intensity, &n, &den.coeffs()[..d])
    }

    fn validate_density(&self) -> Result<()> {
        let b1 = self.dominant_rate();
        let hi = 40.0 / b1;
        let mut grid = geometric_grid(hi * 1e-8, hi, 10_000);
        grid.push(0.0);
        for u in grid {
            let z = self.unit_density_c(u);
            if z.im.abs() > 1e-12 * z.norm().max(1e-300) && z.im.abs() > 1e-14 {
                return Err(Error::InvalidJumpSpec(format!(
                    "density is not real at |x| = {u} (imaginary part {:e})",
                    z.im
                )));
            }
            if z.re < NONNEG_TOL {
                return Err(Error::InvalidJumpSpec(format!(
                    "density is negative at |x| = {u} (value {:e})",
                    z.re
                )));
            }
        }
        Ok(())
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    /// Degree `d` of the transform denominator.
    pub fn degree(&self) -> usize {
        self.denominator.len()
    }

    /// Numerator coefficients, ascending; `(beta_d, ..., beta_1)`.
    pub fn numerator(&self) -> &[f64] {
        &self.numerator
    }

    /// Lower denominator coefficients, ascending; `(rho_d, ..., rho_1)`.
    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    /// Rates with multiplicity, sorted by real part, real rates first on ties.
    pub fn rates(&self) -> &[Complex64] {
        &self.rates
    }

    /// The real rate with the smallest real part (`b_1` or `c_1`).
    pub fn dominant_rate(&self) -> f64 {
        self.rates[0].re
    }

    pub fn partial_fractions(&self) -> &[PartialFraction] {
        &self.fractions
    }

    /// Erlang-mixture form of the jump law, when every partial-fraction
    /// coefficient is real and nonnegative.
    pub fn erlang_mixture(&self) -> Option<&[ErlangComponent]> {
        self.erlang.as_deref()
    }

    /// Whether the rates are real and pairwise distinct (hyperexponential-type).
    pub fn has_distinct_real_rates(&self) -> bool {
        self.rates.iter().all(|b| b.im == 0.0)
            && self.rates.windows(2).all(|w| (w[1].re - w[0].re).abs() > 1e-7 * w[1].re.abs())
    }

    fn unit_density_c(&self, u: f64) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for pf in &self.fractions {
            let e = (-pf.rate * u).exp();
            let mut poly = Complex64::new(0.0, 0.0);
            for c in pf.coeffs.iter().rev() {
                poly = poly * u + c;
            }
            total += poly * e;
        }
        total
    }

    /// Probability density of the jump magnitude at `u >= 0`.
    pub fn unit_density(&self, u: f64) -> f64 {
        if u < 0.0 {
            return 0.0;
        }
        self.unit_density_c(u).re
    }

    /// `P(|J| > u)`.
    pub fn unit_tail(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 1.0;
        }
        let mut total = Complex64::new(0.0, 0.0);
        for pf in &self.fractions {
            let b = pf.rate;
            let e = (-b * u).exp();
            for (j, c) in pf.coeffs.iter().enumerate() {
                // int_u^inf t^j e^{-bt} dt = e^{-bu} sum_k j!/k! u^k / b^{j-k+1}
                let mut inner = Complex64::new(0.0, 0.0);
                let mut fact_ratio = 1.0; // j!/k!
                let mut k = j as i64;
                while k >= 0 {
                    inner += fact_ratio * u.powi(k as i32) / b.powi(j as i32 - k as i32 + 1);
                    fact_ratio *= k as f64;
                    k -= 1;
                }
                total += c * e * inner;
            }
        }
        total.re.clamp(0.0, 1.0)
    }

    /// Mean jump magnitude `E|J|`.
    pub fn mean_magnitude(&self) -> f64 {
        // tail transform at 0 equals intensity * E|J|
        self.tt_num.eval(0.0) / self.tt_den.eval(0.0)
    }

    /// Density of the Lévy measure at signed `x` (`intensity * f(|x|)` on the
    /// jump side, zero elsewhere).
    pub fn density(&self, x: f64) -> f64 {
        match self.side {
            Side::Negative if x < 0.0 => self.intensity * self.unit_density(-x),
            Side::Positive if x > 0.0 => self.intensity * self.unit_density(x),
            _ => 0.0,
        }
    }

    /// Lévy-measure tail at signed `x`: `Pi(x, inf)` for the positive side,
    /// `Pi(-inf, x)` for the negative side.
    pub fn tail(&self, x: f64) -> f64 {
        match self.side {
            Side::Negative if x < 0.0 => self.intensity * self.unit_tail(-x),
            Side::Positive if x > 0.0 => self.intensity * self.unit_tail(x),
            _ => self.intensity,
        }
    }

    /// Whether `r` lies strictly inside the analyticity region of the transform.
    pub fn admissible(&self, r: Complex64) -> bool {
        match self.side {
            Side::Negative => r.re > -self.dominant_rate(),
            Side::Positive => r.re < self.dominant_rate(),
        }
    }

    /// Tail transform `int e^{r x} tail(x) dx` over the jump half-line.
    pub fn transform(&self, r: Complex64) -> Result<Complex64> {
        if !self.admissible(r) {
            return Err(Error::OutsideDomain(format!(
                "r = {r} is outside the analyticity region of the {} jump transform",
                self.side
            )));
        }
        Ok(self.transform_unchecked(r))
    }

    pub(crate) fn transform_unchecked(&self, r: Complex64) -> Complex64 {
        self.intensity * self.tt_num.eval_c(r) / self.tt_den.eval_c(r)
    }

    pub(crate) fn transform_derivative(&self, r: Complex64) -> Complex64 {
        let n = self.tt_num.eval_c(r);
        let dn = self.tt_num.derivative().eval_c(r);
        let d = self.tt_den.eval_c(r);
        let dd = self.tt_den.derivative().eval_c(r);
        self.intensity * (dn * d - n * dd) / (d * d)
    }

    /// Polynomials `(P, Q)` with `transform(r) = intensity * P(r) / Q(r)`.
    pub fn transform_polys(&self) -> (&Poly, &Poly) {
        (&self.tt_num, &self.tt_den)
    }

    /// Moment generating function `E e^{r J}` of the signed jump.
    pub fn jump_mgf(&self, r: Complex64) -> Complex64 {
        let z = match self.side {
            Side::Negative => r,
            Side::Positive => -r,
        };
        Poly::new(self.numerator.clone()).eval_c(z) / Poly::monic(&self.denominator).eval_c(z)
    }

    /// Companion-matrix realization `(beta, R)` with density
    /// `beta e^{R x} e` on the jump half-line.
    pub fn representation(&self) -> (Vec<f64>, DMatrix<f64>) {
        let r = match self.side {
            Side::Negative => linalg::companion_negative(&self.denominator),
            Side::Positive => linalg::companion_positive(&self.denominator),
        };
        (self.numerator.clone(), r)
    }

    /// Unit-mass density evaluated through the matrix realization.
    pub fn matrix_density(&self, x: f64) -> f64 {
        let (beta, r) = self.representation();
        linalg::quad_form_exp(&beta, &r, x)
    }

    pub fn mirrored(&self) -> MeJumpSpec {
        MeJumpSpec::new(self.side.opposite(), self.intensity, &self.numerator, &self.denominator)
            .expect("mirroring preserves validity")
    }
}

/// Groups numerically split multiple roots. Returns `(rate, multiplicity)` and
/// rewrites `rates` with the cluster centers.
/// Refines a rate of multiplicity `m` as a simple root of the `(m-1)`-th derivative of `den`.
fn polish_multiple_rate(den: &Poly, rate: Complex64, m: usize) -> Complex64 {
    if m < 2 {
        return rate;
    }
    let q = (1..m).fold(den.clone(), |p, _| p.derivative());
    let dq = q.derivative();
    let mut z = -rate;
    for _ in 0..20 {
        let slope = dq.eval_c(z);
        if slope.norm() == 0.0 {
            break;
        }
        let step = q.eval_c(z) / slope;
        z -= step;
        if step.norm() <= 1e-16 * z.norm() {
            break;
        }
    }
    if z.is_finite() && (z + rate).norm() < CLUSTER_RADIUS * (1.0 + rate.norm()) {
        -z
    } else {
        rate
    }
}

fn cluster_rates(rates: &mut [Complex64], den: &Poly) -> Vec<(Complex64, usize)> {
    let n = rates.len();
    let mut assigned = vec![false; n];
    let mut clusters: Vec<(Complex64, Vec<usize>)> = Vec::new();
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let mut members = vec![i];
        assigned[i] = true;
        for j in i + 1..n {
            if !assigned[j] && (rates[i] - rates[j]).norm() < CLUSTER_RADIUS * (1.0 + rates[i].norm()) {
                members.push(j);
                assigned[j] = true;
            }
        }
        let mean = members.iter().map(|&k| rates[k]).sum::<Complex64>() / members.len() as f64;
        let center = polish_multiple_rate(den, mean, members.len());
        clusters.push((center, members));
    }
    // Accept the clustering only if it reproduces the denominator.
    let candidate: Vec<Complex64> = clusters
        .iter()
        .flat_map(|(c, m)| std::iter::repeat_n(-*c, m.len()))
        .collect();
    let rebuilt = poly_from_roots(&candidate);
    let scale = den.coeffs().iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let ok = rebuilt
        .iter()
        .zip(den.coeffs())
        .all(|(a, b)| (a - Complex64::new(*b, 0.0)).norm() <= 1e-9 * scale);
    let clusters: Vec<(Complex64, usize)> = if ok {
        clusters.into_iter().map(|(c, m)| (c, m.len())).collect()
    } else {
        rates.iter().map(|r| (*r, 1)).collect()
    };

    let mut cleaned: Vec<(Complex64, usize)> = clusters
        .into_iter()
        .map(|(c, m)| {
            let c = if c.im.abs() <= 1e-10 * c.norm() {
                Complex64::new(c.re, 0.0)
            } else {
                c
            };
            (c, m)
        })
        .collect();
    // Enforce exact conjugate symmetry.
    let snapshot = cleaned.clone();
    for (c, _) in cleaned.iter_mut() {
        if c.im != 0.0 {
            if let Some((partner, _)) = snapshot
                .iter()
                .filter(|(p, _)| p.im * c.im < 0.0)
                .min_by(|a, b| (a.0 - c.conj()).norm().total_cmp(&(b.0 - c.conj()).norm()))
            {
                let avg = 0.5 * (*c + partner.conj());
                *c = avg;
            }
        }
    }
    let mut k = 0;
    for (c, m) in &cleaned {
        for _ in 0..*m {
            rates[k] = *c;
            k += 1;
        }
    }
    cleaned
}

/// Partial fractions of `N(z) / prod (z + b_i)^{m_i}` mapped to the density
/// `sum_i sum_j c_ij u^j e^{-b_i u}`.
fn partial_fractions(num: &Poly, clusters: &[(Complex64, usize)]) -> Vec<PartialFraction> {
    let mut out = Vec::with_capacity(clusters.len());
    for (i, &(b, m)) in clusters.iter().enumerate() {
        // t = z + b
        let n_shift = num.taylor_shift(-b);
        let mut q = vec![Complex64::new(1.0, 0.0)];
        for (l, &(bl, ml)) in clusters.iter().enumerate() {
            if l == i {
                continue;
            }
            for _ in 0..ml {
                q = crate::poly::mul_complex_poly(&q, &[bl - b, Complex64::new(1.0, 0.0)]);
            }
        }
        // Taylor coefficients of N/Q up to order m-1.
        let mut g = vec![Complex64::new(0.0, 0.0); m];
        for k in 0..m {
            let mut acc = *n_shift.get(k).unwrap_or(&Complex64::new(0.0, 0.0));
            for j in 1..=k {
                if let Some(qj) = q.get(j) {
                    acc -= qj * g[k - j];
                }
            }
            g[k] = acc / q[0];
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); m];
        let mut fact = 1.0;
        for j in 1..=m {
            if j > 1 {
                fact *= (j - 1) as f64;
            }
            coeffs[j - 1] = g[m - j] / fact;
        }
        out.push(PartialFraction { rate: b, coeffs });
    }
    out
}

fn erlang_mixture(fractions: &[PartialFraction]) -> Option<Vec<ErlangComponent>> {
    let mut comps = Vec::new();
    for pf in fractions {
        if pf.rate.im != 0.0 {
            return None;
        }
        let b = pf.rate.re;
        let mut fact = 1.0;
        for (j, c) in pf.coeffs.iter().enumerate() {
            if j > 0 {
                fact *= j as f64;
            }
            if c.im.abs() > 1e-12 * (1.0 + c.norm()) {
                return None;
            }
            let w = c.re * fact / b.powi(j as i32 + 1);
            if w < -1e-13 {
                return None;
            }
            if w > 0.0 {
                comps.push(ErlangComponent {
                    weight: w,
                    shape: j + 1,
                    rate: b,
                });
            }
        }
    }
    let total: f64 = comps.iter().map(|c| c.weight).sum();
    if (total - 1.0).abs() > 1e-9 {
        return None;
    }
    Some(comps)
}

pub type TailFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type TransformFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// A jump side given only through user-supplied tail, tail transform, and
/// analyticity abscissa. The library never infers these.
#[derive(Clone)]
pub struct GeneralJumpSpec {
    side: Side,
    label: String,
    intensity: f64,
    tail: TailFn,
    transform: TransformFn,
    density: Option<TailFn>,
    abscissa: f64,
    mean_magnitude: f64,
    second_moment: Option<f64>,
    breakpoints: Vec<f64>,
}

impl fmt::Debug for GeneralJumpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralJumpSpec")
            .field("side", &self.side)
            .field("label", &self.label)
            .field("intensity", &self.intensity)
            .field("abscissa", &self.abscissa)
            .field("mean_magnitude", &self.mean_magnitude)
            .finish()
    }
}

impl PartialEq for GeneralJumpSpec {
    fn eq(&self, other: &Self) -> bool {
        self.side == other.side
            && self.label == other.label
            && self.intensity == other.intensity
            && Arc::ptr_eq(&self.tail, &other.tail)
    }
}

impl GeneralJumpSpec {
    /// `tail` and `transform` use the signed conventions of the module docs.
    /// `abscissa > 0` bounds the analyticity region: `Re r < abscissa` for
    /// positive jumps, `Re r > -abscissa` for negative jumps.
    pub fn new(
        side: Side,
        label: impl Into<String>,
        tail: TailFn,
        transform: TransformFn,
        abscissa: f64,
        mean_magnitude: f64,
    ) -> Result<Self> {
        let intensity = tail(side.sign() * 1e-300);
        let spec = GeneralJumpSpec {
            side,
            label: label.into(),
            intensity,
            tail,
            transform,
            density: None,
            abscissa,
            mean_magnitude,
            second_moment: None,
            breakpoints: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_density(mut self, density: TailFn) -> Self {
        self.density = Some(density);
        self
    }

    pub fn with_second_moment(mut self, m2: f64) -> Self {
        self.second_moment = Some(m2);
        self
    }

    /// Jump magnitudes where the tail or density is not smooth; quadratures
    /// over the jump law are split there.
    pub fn with_breakpoints(mut self, magnitudes: &[f64]) -> Self {
        self.breakpoints = magnitudes.iter().copied().filter(|b| *b > 0.0 && b.is_finite()).collect();
        self.breakpoints.sort_by(f64::total_cmp);
        self
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    fn validate(&self) -> Result<()> {
        if !(self.intensity.is_finite() && self.intensity >= 0.0) {
            return Err(Error::InvalidJumpSpec("general jump intensity must be finite".into()));
        }
        if !(self.abscissa > 0.0) {
            return Err(Error::InvalidJumpSpec("abscissa must be positive".into()));
        }
        let s = self.side.sign();
        let mut prev = self.intensity;
        for u in geometric_grid(1e-6, 1e3, 200) {
            let t = (self.tail)(s * u);
            if t > prev + 1e-12 * (1.0 + prev) || t < 0.0 {
                return Err(Error::InvalidJumpSpec(format!(
                    "tail of '{}' is not nonincreasing in |x| near {u}",
                    self.label
                )));
            }
            prev = t;
        }
        let scale = 1.0 / self.abscissa.min(1.0);
        for r in [0.0, -0.5 * self.abscissa.min(1.0), 0.25 * self.abscissa.min(1.0)] {
            let r = s * r;
            let quad = crate::quad::integrate_to_inf(
                |u| (r * s * u).exp() * (self.tail)(s * u),
                0.0,
                scale,
                crate::quad::Tolerance::new(1e-11, 1e-10),
            )?;
            let given = (self.transform)(Complex64::new(r, 0.0));
            if (given.re - quad).abs() > 1e-6 * (1.0 + quad.abs()) {
                return Err(Error::InvalidJumpSpec(format!(
                    "transform of '{}' disagrees with the tail at r = {r}: {} vs {quad}",
                    self.label, given.re
                )));
            }
        }
        Ok(())
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn abscissa(&self) -> f64 {
        self.abscissa
    }

    pub fn mean_magnitude(&self) -> f64 {
        self.mean_magnitude
    }

    pub fn second_moment(&self) -> Option<f64> {
        self.second_moment
    }

    pub fn tail(&self, x: f64) -> f64 {
        if x * self.side.sign() <= 0.0 {
            return self.intensity;
        }
        (self.tail)(x)
    }

    /// Lévy density at signed `x`; central differences of the tail when no
    /// density was supplied.
    pub fn density(&self, x: f64) -> f64 {
        if x * self.side.sign() <= 0.0 {
            return 0.0;
        }
        match &self.density {
            Some(f) => f(x),
            None => {
                let h = 1e-6 * (1.0 + x.abs());
                let u = x.abs();
                let lo = (u - h).max(0.5 * u);
                let s = self.side.sign();
                ((self.tail)(s * lo) - (self.tail)(s * (u + h))) / (u + h - lo)
            }
        }
    }

    pub fn admissible(&self, r: Complex64) -> bool {
        match self.side {
            Side::Negative => r.re > -self.abscissa,
            Side::Positive => r.re < self.abscissa,
        }
    }

    pub fn transform(&self, r: Complex64) -> Result<Complex64> {
        if !self.admissible(r) {
            return Err(Error::OutsideDomain(format!(
                "r = {r} is outside the analyticity region of '{}'",
                self.label
            )));
        }
        Ok((self.transform)(r))
    }

    pub(crate) fn transform_unchecked(&self, r: Complex64) -> Complex64 {
        (self.transform)(r)
    }

    pub fn mirrored(&self) -> GeneralJumpSpec {
        let tail = self.tail.clone();
        let transform = self.transform.clone();
        let density = self.density.clone();
        GeneralJumpSpec {
            side: self.side.opposite(),
            label: format!("mirror({})", self.label),
            intensity: self.intensity,
            tail: Arc::new(move |x| tail(-x)),
            transform: Arc::new(move |r| transform(-r)),
            density: density.map(|f| -> TailFn { Arc::new(move |x| f(-x)) }),
            abscissa: self.abscissa,
            mean_magnitude: self.mean_magnitude,
            second_moment: self.second_moment,
            breakpoints: self.breakpoints.clone(),
        }
    }
}

/// The jump measure on one side of the real line.
#[derive(Debug, Clone, PartialEq)]
pub enum Jumps {
    None,
    Me(MeJumpSpec),
    General(GeneralJumpSpec),
}

impl Jumps {
    pub fn is_me_or_none(&self) -> bool {
        !matches!(self, Jumps::General(_))
    }

    pub fn intensity(&self) -> f64 {
        match self {
            Jumps::None => 0.0,
            Jumps::Me(s) => s.intensity(),
            Jumps::General(g) => g.intensity(),
        }
    }

    /// ME degree `d`; zero when the side carries no jumps.
    pub fn me_degree(&self) -> Option<usize> {
        match self {
            Jumps::None => Some(0),
            Jumps::Me(s) => Some(s.degree()),
            Jumps::General(_) => None,
        }
    }

    /// ME rates; empty when the side carries no jumps.
    pub fn me_rates(&self) -> Option<&[Complex64]> {
        match self {
            Jumps::None => Some(&[]),
            Jumps::Me(s) => Some(s.rates()),
            Jumps::General(_) => None,
        }
    }

    pub fn tail(&self, x: f64) -> f64 {
        match self {
            Jumps::None => 0.0,
            Jumps::Me(s) => s.tail(x),
            Jumps::General(g) => g.tail(x),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match self {
            Jumps::None => 0.0,
            Jumps::Me(s) => s.density(x),
            Jumps::General(g) => g.density(x),
        }
    }

    pub fn admissible(&self, r: Complex64) -> bool {
        match self {
            Jumps::None => true,
            Jumps::Me(s) => s.admissible(r),
            Jumps::General(g) => g.admissible(r),
        }
    }

    pub fn transform_unchecked(&self, r: Complex64) -> Complex64 {
        match self {
            Jumps::None => Complex64::new(0.0, 0.0),
            Jumps::Me(s) => s.transform_unchecked(r),
            Jumps::General(g) => g.transform_unchecked(r),
        }
    }

    pub fn transform(&self, r: Complex64) -> Result<Complex64> {
        match self {
            Jumps::None => Ok(Complex64::new(0.0, 0.0)),
            Jumps::Me(s) => s.transform(r),
            Jumps::General(g) => g.transform(r),
        }
    }

    /// Derivative of the tail transform; central differences for general sides.
    pub fn transform_derivative(&self, r: Complex64) -> Complex64 {
        match self {
            Jumps::None => Complex64::new(0.0, 0.0),
            Jumps::Me(s) => s.transform_derivative(r),
            Jumps::General(g) => {
                let h = 1e-5 * (1.0 + r.norm());
                (g.transform_unchecked(r + h) - g.transform_unchecked(r - h)) / (2.0 * h)
            }
        }
    }

    pub fn mean_magnitude(&self) -> f64 {
        match self {
            Jumps::None => 0.0,
            Jumps::Me(s) => s.mean_magnitude(),
            Jumps::General(g) => g.mean_magnitude(),
        }
    }

    /// A length scale of the jump sizes, used to tune quadrature maps.
    pub fn length_scale(&self) -> f64 {
        match self {
            Jumps::None => 1.0,
            Jumps::Me(s) => 1.0 / s.dominant_rate(),
            Jumps::General(g) => g.mean_magnitude().max(1e-3),
        }
    }

    pub fn mirrored(&self) -> Jumps {
        match self {
            Jumps::None => Jumps::None,
            Jumps::Me(s) => Jumps::Me(s.mirrored()),
            Jumps::General(g) => Jumps::General(g.mirrored()),
        }
    }

    pub fn as_me(&self) -> Option<&MeJumpSpec> {
        match self {
            Jumps::Me(s) => Some(s),
            _ => None,
        }
    }

    /// Jump magnitudes where the law is not smooth (general specs only).
    pub fn breakpoints(&self) -> &[f64] {
        match self {
            Jumps::General(g) => g.breakpoints(),
            _ => &[],
        }
    }
}

/// Case labels and mean of a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub case_neg: Case,
    pub case_pos: Case,
    /// `E X_1`; `None` when a jump mean is infinite.
    pub mean: Option<f64>,
}

/// A Lévy process with cumulant `a r + sigma^2 r^2 / 2 + int (e^{rx} - 1) Pi(dx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    drift: f64,
    sigma: f64,
    neg: Jumps,
    pos: Jumps,
}

impl LevyModel {
    pub fn new(drift: f64, sigma: f64, neg: Jumps, pos: Jumps) -> Result<Self> {
        if !drift.is_finite() {
            return Err(Error::InvalidModel("drift must be finite".into()));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidModel(format!("sigma must be finite and nonnegative (got {sigma})")));
        }
        // A side with zero intensity carries no jumps.
        let neg = if neg.intensity() == 0.0 { Jumps::None } else { neg };
        let pos = if pos.intensity() == 0.0 { Jumps::None } else { pos };
        if !neg.is_me_or_none() && !pos.is_me_or_none() {
            return Err(Error::InvalidModel(
                "at least one jump side must be matrix-exponential or absent".into(),
            ));
        }
        for (jumps, side) in [(&neg, Side::Negative), (&pos, Side::Positive)] {
            let actual = match jumps {
                Jumps::None => side,
                Jumps::Me(s) => s.side(),
                Jumps::General(g) => g.side(),
            };
            if actual != side {
                return Err(Error::InvalidModel(format!(
                    "jump specification for the {side} side is oriented to the {actual} side"
                )));
            }
            if !jumps.intensity().is_finite() {
                return Err(Error::InvalidModel("jump intensities must be finite".into()));
            }
        }
        Ok(LevyModel { drift, sigma, neg, pos })
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn jumps(&self, side: Side) -> &Jumps {
        match side {
            Side::Negative => &self.neg,
            Side::Positive => &self.pos,
        }
    }

    pub fn neg_jumps(&self) -> &Jumps {
        &self.neg
    }

    pub fn pos_jumps(&self) -> &Jumps {
        &self.pos
    }

    /// Total jump intensity.
    pub fn jump_intensity(&self) -> f64 {
        self.neg.intensity() + self.pos.intensity()
    }

    /// Per-side case: `(NS)` when `sigma > 0` or the drift points toward the
    /// side (`a > 0` for `+`, `a < 0` for `-`); `(S)` otherwise.
    pub fn case(&self, side: Side) -> Case {
        if self.sigma > 0.0 || side.sign() * self.drift > 0.0 {
            Case::NonStepwise
        } else {
            Case::Stepwise
        }
    }

    /// `E X_1 = a + lambda_+ E|J_+| - lambda_- E|J_-|`.
    pub fn mean(&self) -> Option<f64> {
        let pos = match &self.pos {
            Jumps::None => 0.0,
            Jumps::Me(s) => s.transform_unchecked(Complex64::new(0.0, 0.0)).re,
            Jumps::General(g) => g.intensity() * g.mean_magnitude(),
        };
        let neg = match &self.neg {
            Jumps::None => 0.0,
            Jumps::Me(s) => s.transform_unchecked(Complex64::new(0.0, 0.0)).re,
            Jumps::General(g) => g.intensity() * g.mean_magnitude(),
        };
        let mu = self.drift + pos - neg;
        mu.is_finite().then_some(mu)
    }

    pub fn classify(&self) -> Classification {
        Classification {
            case_neg: self.case(Side::Negative),
            case_pos: self.case(Side::Positive),
            mean: self.mean(),
        }
    }

    /// Number `N` of cumulant roots in the half-plane of `side`; `None` for a
    /// general (non-ME) side.
    pub fn root_count(&self, side: Side) -> Option<usize> {
        let d = self.jumps(side).me_degree()?;
        Some(match self.case(side) {
            Case::NonStepwise => d + 1,
            Case::Stepwise => d,
        })
    }

    /// Whether `r` lies in the common analyticity strip of both tail transforms.
    pub fn admissible(&self, r: Complex64) -> bool {
        self.neg.admissible(r) && self.pos.admissible(r)
    }

    /// Cumulant `k(r)`, with `k(0) = 0` exactly.
    pub fn cumulant(&self, r: Complex64) -> Result<Complex64> {
        if !self.admissible(r) {
            return Err(Error::OutsideDomain(format!("r = {r} is outside the cumulant strip")));
        }
        Ok(self.cumulant_unchecked(r))
    }

    /// Cumulant through the analytic continuation of the jump transforms,
    /// without the strip check.
    pub fn cumulant_unchecked(&self, r: Complex64) -> Complex64 {
        // lambda (E e^{rJ} - 1) equals r * tail_transform(r) on the positive
        // side and -r * tail_transform(r) on the negative side.
        let jumps = self.pos.transform_unchecked(r) - self.neg.transform_unchecked(r);
        r * (self.drift + 0.5 * self.sigma * self.sigma * r + jumps)
    }

    /// `k(r) / r = a + sigma^2 r / 2 + tail_transform_+(r) - tail_transform_-(r)`,
    /// analytic at `r = 0` with value `E X_1`.
    pub fn cumulant_over_r(&self, r: Complex64) -> Complex64 {
        self.drift + 0.5 * self.sigma * self.sigma * r + self.pos.transform_unchecked(r)
            - self.neg.transform_unchecked(r)
    }

    pub fn cumulant_over_r_derivative(&self, r: Complex64) -> Complex64 {
        0.5 * self.sigma * self.sigma + self.pos.transform_derivative(r) - self.neg.transform_derivative(r)
    }

    pub fn cumulant_derivative(&self, r: Complex64) -> Complex64 {
        let t = self.pos.transform_unchecked(r) - self.neg.transform_unchecked(r);
        let dt = self.pos.transform_derivative(r) - self.neg.transform_derivative(r);
        self.drift + self.sigma * self.sigma * r + t + r * dt
    }

    /// The dual process `-X`.
    pub fn mirrored(&self) -> LevyModel {
        LevyModel {
            drift: -self.drift,
            sigma: self.sigma,
            neg: self.pos.mirrored(),
            pos: self.neg.mirrored(),
        }
    }

    /// Largest rate modulus over the ME sides (0 when there are none).
    pub fn max_rate(&self) -> f64 {
        [&self.neg, &self.pos]
            .iter()
            .filter_map(|j| j.me_rates())
            .flat_map(|r| r.iter().map(|z| z.norm()))
            .fold(0.0, f64::max)
    }

    /// Finite variance of `X_1`. Unknown for a general side without a declared
    /// second moment.
    pub fn variance_finite(&self) -> Option<bool> {
        for j in [&self.neg, &self.pos] {
            if let Jumps::General(g) = j {
                return g.second_moment().map(|m| m.is_finite());
            }
        }
        Some(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_to_inf, Tolerance};
    use approx::assert_relative_eq;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn exponential_negative_spec() {
        let s = MeJumpSpec::exponential(Side::Negative, 1.0, 1.0).unwrap();
        assert_eq!(s.degree(), 1);
        assert_relative_eq!(s.density(-0.7), (-0.7f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(s.tail(-1.0), (-1.0f64).exp(), max_relative = 1e-14);
        assert_eq!(s.density(0.5), 0.0);
    }

    #[test]
    fn erlang_two_spec() {
        let s = MeJumpSpec::new(Side::Negative, 1.0, &[4.0, 0.0], &[4.0, 4.0]).unwrap();
        for x in [-0.1, -1.0, -3.0] {
            assert_relative_eq!(s.density(x), 4.0 * x.abs() * (2.0 * x).exp(), max_relative = 1e-9);
        }
        assert_relative_eq!(s.transform(c(0.0)).unwrap().re, 1.0, max_relative = 1e-14);
        let e = s.erlang_mixture().unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].shape, 2);
        assert_relative_eq!(e[0].rate, 2.0, max_relative = 1e-9);
        let via_helper = MeJumpSpec::erlang(Side::Negative, 1.0, 2, 2.0).unwrap();
        assert_eq!(via_helper.denominator(), s.denominator());
    }

    #[test]
    fn cosine_modulated_spec_has_complex_rates() {
        let w = 4.0 * std::f64::consts::PI.powi(2);
        let s = MeJumpSpec::new(Side::Positive, 1.0, &[1.0 + w, 0.0, 0.0], &[1.0 + w, 3.0 + w, 3.0]).unwrap();
        assert_eq!(s.rates().len(), 3);
        assert_eq!(s.rates()[0].im, 0.0);
        assert_relative_eq!(s.rates()[1].im.abs(), 2.0 * std::f64::consts::PI, max_relative = 1e-9);
        let cst = (1.0 + w) / w;
        for x in [0.25, 0.5, 1.3, 2.0] {
            let want = cst * (-x as f64).exp() * (1.0 - (2.0 * std::f64::consts::PI * x).cos());
            assert!((s.density(x) - want).abs() < 1e-10, "{x}");
        }
        assert!(s.density(1.0).abs() < 1e-12);
        assert!(s.erlang_mixture().is_none());
    }

    #[test]
    fn exponential_positive_transform() {
        let s = MeJumpSpec::exponential(Side::Positive, 1.0, 2.0).unwrap();
        assert_relative_eq!(s.transform(c(0.0)).unwrap().re, 0.5, max_relative = 1e-15);
        assert!(s.transform(c(2.5)).is_err());
    }

    #[test]
    fn construction_errors() {
        // transform(0) != 1
        assert!(matches!(
            MeJumpSpec::new(Side::Negative, 1.0, &[2.0], &[1.0]),
            Err(Error::InvalidJumpSpec(_))
        ));
        // rate -0.5
        assert!(matches!(
            MeJumpSpec::new(Side::Negative, 1.0, &[-0.5], &[-0.5]),
            Err(Error::NonPositiveRate(_))
        ));
        // numerator too long
        assert!(MeJumpSpec::new(Side::Negative, 1.0, &[1.0, 0.0], &[1.0]).is_err());
        // negative density: 2 e^{-x} - ... mixture with negative weight
        assert!(MeJumpSpec::hyperexponential(Side::Positive, 1.0, &[2.0, -1.0], &[1.0, 3.0]).is_err());
    }

    #[test]
    fn matrix_and_partial_fraction_densities_agree() {
        let s = MeJumpSpec::hyperexponential(Side::Negative, 1.0, &[0.3, 0.7], &[1.0, 4.0]).unwrap();
        for x in [-0.01, -0.5, -2.0, -6.0] {
            assert_relative_eq!(s.matrix_density(x), s.unit_density(-x), max_relative = 1e-10);
        }
        let p = MeJumpSpec::erlang(Side::Positive, 1.0, 3, 1.5).unwrap();
        for x in [0.01, 0.5, 2.0, 6.0] {
            assert_relative_eq!(p.matrix_density(x), p.unit_density(x), max_relative = 1e-8);
        }
    }

    #[test]
    fn transform_matches_tail_quadrature() {
        let s = MeJumpSpec::erlang(Side::Positive, 0.7, 2, 3.0).unwrap();
        for r in [-2.0, -0.3, 0.0, 0.9, 2.5] {
            let q = integrate_to_inf(|x| (r * x).exp() * s.tail(x), 0.0, 0.3, Tolerance::default()).unwrap();
            assert_relative_eq!(s.transform(c(r)).unwrap().re, q, max_relative = 1e-9);
        }
    }

    #[test]
    fn cumulant_examples() {
        let bm = LevyModel::new(0.0, 2f64.sqrt(), Jumps::None, Jumps::None).unwrap();
        assert_relative_eq!(bm.cumulant(c(2.0)).unwrap().re, 4.0, max_relative = 1e-15);

        let neg = Jumps::Me(MeJumpSpec::exponential(Side::Negative, 1.0, 1.0).unwrap());
        let m = LevyModel::new(2.0, 0.0, neg.clone(), Jumps::None).unwrap();
        assert_relative_eq!(m.cumulant(c(1.0)).unwrap().re, 1.5, max_relative = 1e-15);

        let m = LevyModel::new(1.0, 0.0, neg, Jumps::None).unwrap();
        let k = m.cumulant(Complex64::new(0.0, 1.0)).unwrap();
        // i - i/(1+i) = -0.5 + 0.5 i (direct complex arithmetic)
        let i = Complex64::new(0.0, 1.0);
        let oracle = i - i / (Complex64::new(1.0, 0.0) + i);
        assert!((k - oracle).norm() < 1e-15);
        assert!((k - Complex64::new(-0.5, 0.5)).norm() < 1e-15);
        assert_eq!(m.cumulant(c(0.0)).unwrap(), c(0.0));
    }

    #[test]
    fn classification_examples() {
        let exp1 = |lambda| Jumps::Me(MeJumpSpec::exponential(Side::Negative, lambda, 1.0).unwrap());
        let m = LevyModel::new(1.0, 0.0, exp1(1.0), Jumps::None).unwrap();
        let c1 = m.classify();
        assert_eq!(c1.case_neg, Case::Stepwise);
        assert_eq!(c1.case_pos, Case::NonStepwise);
        assert_eq!(c1.mean, Some(0.0));
        assert_eq!(m.root_count(Side::Negative), Some(1));
        assert_eq!(m.root_count(Side::Positive), Some(1));

        let m = LevyModel::new(1.0, 1.0, exp1(1.0), Jumps::None).unwrap();
        assert_eq!(m.classify().case_neg, Case::NonStepwise);
        assert_eq!(m.classify().case_pos, Case::NonStepwise);

        let m = LevyModel::new(1.0, 0.0, exp1(2.0), Jumps::None).unwrap();
        assert_eq!(m.classify().mean, Some(-1.0));

        let m = LevyModel::new(-1.0, 0.0, exp1(2.0), Jumps::None).unwrap();
        assert_eq!(m.case(Side::Negative), Case::NonStepwise);
        assert_eq!(m.case(Side::Positive), Case::Stepwise);
    }

    #[test]
    fn model_rejects_bad_inputs() {
        assert!(LevyModel::new(0.0, -1.0, Jumps::None, Jumps::None).is_err());
        let wrong = Jumps::Me(MeJumpSpec::exponential(Side::Positive, 1.0, 1.0).unwrap());
        assert!(LevyModel::new(0.0, 1.0, wrong, Jumps::None).is_err());
    }
}

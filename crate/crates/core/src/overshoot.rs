//! First passage over a level `x > 0`: the discounted overshoot law, its
//! `s -> 0` limit, and the joint (Gerber-Shiu) density of the pre-passage
//! maximum gap, the pre-jump gap and the overshoot.
//!
//! Both laws have the structure
//! `A f+(x) delta(v) + int_0^x K(v + y) P{X+ in x - dy}` where `f+` is the
//! density of the supremum and `K(t) = p pi(t) + int_0^inf pi(t + w) f-(w) dw`
//! convolves the positive jump density `pi` with the law of `-X-`. The
//! weights `p`, `q` of `f-` and `A` are the killed quantities divided by `s`,
//! or their limits when `s = 0`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::factorization::{absolute_extremum, build_component, limit_component, ExtremumLaw, FactorizationComponent};
use crate::linalg::{expm, quad_form_exp, solve_shifted_c, unit_last};
use crate::model::{Jumps, LevyModel, Side};
use crate::numeric::coerce_real_vec;
use crate::quad::{integrate, integrate_to_inf, Tolerance};

/// For integrands carrying a numerically inverted density.
fn inverted_tolerance() -> Tolerance {
    Tolerance {
        abs: 1e-12,
        rel: 1e-10,
        max_intervals: 20_000,
    }
}

fn tolerance() -> Tolerance {
    Tolerance {
        abs: 1e-13,
        rel: 1e-11,
        max_intervals: 20_000,
    }
}

/// `K(t)` and its tail integral `L(y) = int_0^inf K(v + y) dv`.
#[derive(Debug, Clone)]
pub(crate) struct Kernel {
    p: f64,
    q: Vec<f64>,
    r: DMatrix<f64>,
    decay: f64,
    jumps: Jumps,
    matrix: Option<MatrixKernel>,
}

/// Closed form `K(t) = lambda beta e^{St} u` when the positive jumps are ME.
#[derive(Debug, Clone)]
struct MatrixKernel {
    lambda: f64,
    beta: Vec<f64>,
    s: DMatrix<f64>,
    u: DVector<f64>,
    tail_u: DVector<f64>,
}

impl Kernel {
    /// `comp` is a negative-side component; its weights are multiplied by `scale`.
    pub(crate) fn new(comp: &FactorizationComponent, scale: f64, jumps: &Jumps) -> Result<Kernel> {
        let p = comp.atom() * scale;
        let q: Vec<f64> = comp.q().iter().map(|v| v * scale).collect();
        let decay = comp.roots().iter().map(|r| r.re).fold(f64::INFINITY, f64::min);
        let matrix = match (jumps, comp.spectral()) {
            (Jumps::Me(spec), Some(sp)) => {
                let (beta, s) = spec.representation();
                let d = beta.len();
                let e = unit_last(d).map(|x| Complex64::new(x, 0.0));
                let qv: Vec<Complex64> = (0..sp.eig.len())
                    .map(|i| (0..q.len()).map(|k| q[k] * sp.v[(k, i)]).sum())
                    .collect();
                let mut u = e.clone() * Complex64::new(p, 0.0);
                for (i, lam) in sp.eig.iter().enumerate() {
                    // (r I - S)^{-1} e with r = lam
                    let w = qv[i] * sp.vinv_e[i];
                    u += solve_shifted_c(&(-&s), *lam, &e)? * w;
                }
                let u = DVector::from_vec(coerce_real_vec(u.as_slice(), "overshoot kernel")?);
                let tail_u = (-&s)
                    .lu()
                    .solve(&u)
                    .ok_or_else(|| Error::Numerical("singular jump matrix".into()))?;
                Some(MatrixKernel {
                    lambda: spec.intensity(),
                    beta,
                    s,
                    u,
                    tail_u,
                })
            }
            _ => None,
        };
        Ok(Kernel {
            p,
            q,
            r: comp.r_matrix().clone(),
            decay,
            jumps: jumps.clone(),
            matrix,
        })
    }

    /// Density of `-X-` (scaled) at `w > 0`.
    fn minus_density(&self, w: f64) -> f64 {
        quad_form_exp(&self.q, &self.r, -w)
    }

    fn scale(&self) -> f64 {
        let len = self.jumps.length_scale();
        if self.decay > 0.0 {
            len.min(1.0 / self.decay)
        } else {
            len
        }
    }

    fn k(&self, t: f64) -> Result<f64> {
        if let Some(m) = &self.matrix {
            return Ok(m.lambda * quad_form_vec(&m.beta, &m.s, t, &m.u));
        }
        let conv = if self.q.is_empty() {
            0.0
        } else {
            self.split_to_inf(t, |w| self.jumps.density(t + w) * self.minus_density(w))?
        };
        Ok(self.p * self.jumps.density(t) + conv)
    }

    /// `int_0^inf f(w) dw`, split where `shift + w` hits a jump breakpoint.
    fn split_to_inf<F: Fn(f64) -> f64>(&self, shift: f64, f: F) -> Result<f64> {
        let mut lo = 0.0;
        let mut total = 0.0;
        for b in self.jumps.breakpoints().iter().map(|b| b - shift).filter(|b| *b > 0.0) {
            total += integrate(&f, lo, b, tolerance())?;
            lo = b;
        }
        Ok(total + integrate_to_inf(&f, lo, self.scale(), tolerance())?)
    }

    pub(crate) fn l(&self, y: f64) -> Result<f64> {
        if let Some(m) = &self.matrix {
            return Ok(m.lambda * quad_form_vec(&m.beta, &m.s, y, &m.tail_u));
        }
        let tail = |x: f64| if x > 0.0 { self.jumps.tail(x) } else { self.jumps.intensity() };
        let conv = if self.q.is_empty() {
            0.0
        } else {
            self.split_to_inf(y, |w| tail(y + w) * self.minus_density(w))?
        };
        Ok(self.p * tail(y) + conv)
    }
}

/// `beta e^{S t} u`.
fn quad_form_vec(beta: &[f64], s: &DMatrix<f64>, t: f64, u: &DVector<f64>) -> f64 {
    let v = expm(&(s * t)) * u;
    beta.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
}

/// Law of `X_{tau_x} - x` on `{tau_x < theta_s}` (or `{tau_x < inf}` when
/// `s = 0`): an atom at `v = 0` (creeping) plus a density on `v > 0`.
#[derive(Debug, Clone)]
pub struct OvershootLaw {
    level: f64,
    discount: f64,
    atom: f64,
    continuous_mass: f64,
    total_mass: f64,
    plus: ExtremumLaw,
    kernel: Kernel,
}

/// Discounted overshoot law over level `x > 0` at killing rate `s > 0`.
pub fn discounted_overshoot(model: &LevyModel, s: f64, x: f64) -> Result<OvershootLaw> {
    if !(s > 0.0) {
        return Err(Error::Precondition(format!("the discount rate must be positive (got {s})")));
    }
    let comp = build_component(model, s, Side::Negative)?;
    let plus = ExtremumLaw::killed(model, s, Side::Positive)?;
    OvershootLaw::new(model, &comp, 1.0 / s, plus, x, s)
}

/// Undiscounted overshoot law over level `x > 0` for `mu < 0`.
pub fn overshoot_limit(model: &LevyModel, x: f64) -> Result<OvershootLaw> {
    let mean = model
        .mean()
        .ok_or_else(|| Error::Precondition("the mean of X_1 is undefined".into()))?;
    if mean >= 0.0 {
        return Err(Error::Precondition(format!("the limiting overshoot law requires mu < 0 (got {mean})")));
    }
    if model.variance_finite() == Some(false) {
        return Err(Error::Precondition("the variance of X_1 is infinite".into()));
    }
    let comp = limit_component(model)?;
    let plus = absolute_extremum(model)?.law;
    OvershootLaw::new(model, &comp, 1.0, plus, x, 0.0)
}

impl OvershootLaw {
    fn new(
        model: &LevyModel,
        comp: &FactorizationComponent,
        scale: f64,
        plus: ExtremumLaw,
        x: f64,
        discount: f64,
    ) -> Result<OvershootLaw> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::Precondition(format!("the level must be positive and finite (got {x})")));
        }
        let kernel = Kernel::new(comp, scale, model.pos_jumps())?;
        let atom = comp.creep() * scale * plus.density(x);
        let total_mass = 1.0 - plus.cdf(x)?;
        let mut law = OvershootLaw {
            level: x,
            discount,
            atom,
            continuous_mass: 0.0,
            total_mass,
            plus,
            kernel,
        };
        law.continuous_mass = law.convolve(|y| law.kernel.l(y))?;
        Ok(law)
    }

    /// Subintervals of `[0, x]` at multiples of the jump breakpoints measured
    /// from either end.
    fn cuts(&self) -> Vec<f64> {
        let x = self.level;
        let mut cuts = vec![0.0, x];
        for &b in self.kernel.jumps.breakpoints() {
            let mut k = 1.0;
            while k * b < x {
                cuts.push(k * b);
                cuts.push(x - k * b);
                k += 1.0;
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * x.max(1.0));
        cuts
    }

    /// `int_0^x g(y) f+(x - y) dy + p+ g(x)`.
    fn convolve<G: Fn(f64) -> Result<f64>>(&self, g: G) -> Result<f64> {
        let x = self.level;
        let err = std::cell::RefCell::new(None);
        let cont = if matches!(self.kernel.jumps, Jumps::None) {
            0.0
        } else {
            let f = |y: f64| match g(y) {
                Ok(v) => v * self.plus.density(x - y),
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    0.0
                }
            };
            let tol = if self.plus.is_exact() {
                tolerance()
            } else {
                inverted_tolerance()
            };
            let cuts = self.cuts();
            let mut total = 0.0;
            for w in cuts.windows(2) {
                total += integrate(&f, w[0], w[1], tol)?;
            }
            total
        };
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        Ok(cont + self.plus.atom() * g(x)?)
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// Killing rate, `0` for the limit law.
    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Creeping mass at `v = 0`.
    pub fn atom(&self) -> f64 {
        self.atom
    }

    /// `int_0^inf density`.
    pub fn continuous_mass(&self) -> f64 {
        self.continuous_mass
    }

    /// `E[e^{-s tau_x}; tau_x < inf] = P{X+ > x}` from the supremum law.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Overshoot density at `v > 0`.
    pub fn density(&self, v: f64) -> Result<f64> {
        if v <= 0.0 || matches!(self.kernel.jumps, Jumps::None) {
            return Ok(0.0);
        }
        self.convolve(|y| self.kernel.k(v + y))
    }

    /// `P{overshoot in (lo, hi]; tau_x < theta_s}` for `0 <= lo < hi`.
    pub fn interval_mass(&self, lo: f64, hi: f64) -> Result<f64> {
        if hi <= lo {
            return Ok(0.0);
        }
        let l_hi = |y: f64| if hi.is_finite() { self.kernel.l(hi + y) } else { Ok(0.0) };
        self.convolve(|y| Ok(self.kernel.l(lo.max(0.0) + y)? - l_hi(y)?))
    }
}

/// Joint law of `(x - max before tau_x, x - X_{tau_x-}, X_{tau_x} - x)` on
/// `{tau_x < theta_s}`, with the atoms of the extrema kept separate.
#[derive(Debug, Clone)]
pub struct TripleLaw {
    level: f64,
    s: f64,
    plus: ExtremumLaw,
    minus: FactorizationComponent,
    jumps: Jumps,
}

/// Builds the triple law for `s > 0`, `x > 0`.
pub fn triple_law(model: &LevyModel, s: f64, x: f64) -> Result<TripleLaw> {
    if !(s > 0.0) || !(x > 0.0) {
        return Err(Error::Precondition(format!("the triple law needs s > 0 and x > 0 (got s = {s}, x = {x})")));
    }
    Ok(TripleLaw {
        level: x,
        s,
        plus: ExtremumLaw::killed(model, s, Side::Positive)?,
        minus: build_component(model, s, Side::Negative)?,
        jumps: model.pos_jumps().clone(),
    })
}

/// `triple_law(model, s, x)?.density(y, z, v)`.
pub fn triple_law_density(model: &LevyModel, s: f64, x: f64, y: f64, z: f64, v: f64) -> Result<f64> {
    triple_law(model, s, x)?.density(y, z, v)
}

impl TripleLaw {
    fn check(&self, y: f64, z: f64, v: f64) -> Result<()> {
        if !(v > 0.0 && z > 0.0 && y >= 0.0 && y <= self.level.min(z)) {
            return Err(Error::OutsideDomain(format!(
                "(y, z, v) = ({y}, {z}, {v}) is outside 0 <= y <= min(x, z), z > 0, v > 0"
            )));
        }
        Ok(())
    }

    /// Density in `(y, z, v)` on `0 < y < x`, `z > y`.
    pub fn density(&self, y: f64, z: f64, v: f64) -> Result<f64> {
        self.check(y, z, v)?;
        let f_plus = self.plus.density(self.level - y);
        let f_minus = self.minus.density(y - z);
        Ok(f_plus * f_minus * self.jumps.density(v + z) / self.s)
    }

    /// Density in `(z, v)` of the part with `y = x` (supremum atom at zero).
    pub fn density_at_level(&self, z: f64, v: f64) -> Result<f64> {
        self.check(self.level, z, v)?;
        Ok(self.plus.atom() * self.minus.density(self.level - z) * self.jumps.density(v + z) / self.s)
    }

    /// Density in `(y, v)` of the part with `z = y` (infimum atom at zero).
    pub fn density_at_max(&self, y: f64, v: f64) -> Result<f64> {
        self.check(y, y.max(f64::MIN_POSITIVE), v)?;
        Ok(self.plus.density(self.level - y) * self.minus.atom() * self.jumps.density(v + y) / self.s)
    }

    /// Density in `v` of the part with `y = z = x`.
    pub fn density_corner(&self, v: f64) -> Result<f64> {
        self.check(self.level, self.level, v)?;
        Ok(self.plus.atom() * self.minus.atom() * self.jumps.density(v + self.level) / self.s)
    }
}

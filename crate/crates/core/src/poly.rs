//! Real polynomials in ascending coefficient order and their complex roots.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Polynomial `c[0] + c[1] r + ... + c[n] r^n` with real coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Poly { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    /// The monomial `r`.
    pub fn x() -> Self {
        Poly::new(vec![0.0, 1.0])
    }

    /// Monic polynomial whose lower coefficients are `lower` (ascending), i.e.
    /// `lower[0] + lower[1] r + ... + r^d`.
    pub fn monic(lower: &[f64]) -> Self {
        let mut c = lower.to_vec();
        c.push(1.0);
        Poly::new(c)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c)
    }

    pub fn eval_c(&self, r: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * r + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() == 1 {
            return Poly::constant(0.0);
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new(
            (0..n)
                .map(|k| self.coeffs.get(k).unwrap_or(&0.0) + other.coeffs.get(k).unwrap_or(&0.0))
                .collect(),
        )
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, f: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * f).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    /// `p(-r)`.
    pub fn reflect(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| if k % 2 == 1 { -c } else { *c })
                .collect(),
        )
    }

    /// `(p(r) - p(0)) / r`, i.e. drops the constant term and shifts down.
    pub fn shift_down(&self) -> Poly {
        if self.coeffs.len() == 1 {
            return Poly::constant(0.0);
        }
        Poly::new(self.coeffs[1..].to_vec())
    }

    /// Coefficients of `p(t + c)` as a polynomial in `t` (complex shift).
    pub fn taylor_shift(&self, c: Complex64) -> Vec<Complex64> {
        let mut a: Vec<Complex64> = self.coeffs.iter().map(|x| Complex64::new(*x, 0.0)).collect();
        let n = a.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                let next = a[j + 1];
                a[j] += c * next;
            }
        }
        a
    }

    /// Complex roots of the polynomial, each root listed with multiplicity.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        polynomial_roots(&self.coeffs)
    }
}

/// Complex polynomial helpers used for partial fractions and root checks.
pub fn eval_complex_poly(coeffs: &[Complex64], r: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * r + c)
}

pub fn mul_complex_poly(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Monic polynomial (ascending coefficients) with the given roots.
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    roots.iter().fold(vec![Complex64::new(1.0, 0.0)], |acc, z| {
        mul_complex_poly(&acc, &[-z, Complex64::new(1.0, 0.0)])
    })
}

/// Roots of `sum c[k] r^k` via eigenvalues of the companion matrix followed by
/// Newton polishing. Falls back to Aberth iteration if the companion route does
/// not reproduce the coefficients.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let p = Poly::new(coeffs.to_vec());
    let n = p.degree();
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = p.leading();
    let monic: Vec<f64> = p.coeffs().iter().map(|c| c / lead).collect();
    if n == 1 {
        return Ok(vec![Complex64::new(-monic[0], 0.0)]);
    }
    if n == 2 {
        return Ok(quadratic_roots(monic[1], monic[0]));
    }

    let mut companion = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        companion[(i, n - 1)] = -monic[i];
    }
    let eig = companion.complex_eigenvalues();
    let mut roots: Vec<Complex64> = eig.iter().copied().collect();
    if roots.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        roots = aberth(&monic)?;
    }
    // Polishing clustered roots independently can collapse a multiple root
    // onto one member, so keep the raw eigenvalues if polishing hurts.
    let polished: Vec<Complex64> = roots.iter().map(|z| newton_polish_poly(&monic, *z)).collect();
    if reproduces(&monic, &polished) {
        roots = polished;
    }
    if !reproduces(&monic, &roots) {
        roots = aberth(&monic)?;
        if !reproduces(&monic, &roots) {
            return Err(Error::RootFinding(format!(
                "could not resolve roots of a degree-{n} polynomial"
            )));
        }
    }
    Ok(roots)
}

fn quadratic_roots(b: f64, c: f64) -> Vec<Complex64> {
    // r^2 + b r + c
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let sign = if b >= 0.0 { 1.0 } else { -1.0 };
        let q = -0.5 * (b + sign * sq);
        if q == 0.0 {
            return vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
        }
        vec![Complex64::new(q, 0.0), Complex64::new(c / q, 0.0)]
    } else {
        let im = (-disc).sqrt() / 2.0;
        vec![Complex64::new(-b / 2.0, -im), Complex64::new(-b / 2.0, im)]
    }
}

fn newton_polish_poly(monic: &[f64], mut z: Complex64) -> Complex64 {
    let p = Poly::new(monic.to_vec());
    let dp = p.derivative();
    for _ in 0..4 {
        let f = p.eval_c(z);
        let df = dp.eval_c(z);
        if df.norm() == 0.0 {
            break;
        }
        let step = f / df;
        let candidate = z - step;
        if p.eval_c(candidate).norm() < f.norm() {
            z = candidate;
        } else {
            break;
        }
    }
    z
}

fn reproduces(monic: &[f64], roots: &[Complex64]) -> bool {
    let rebuilt = poly_from_roots(roots);
    let scale = monic.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    rebuilt
        .iter()
        .zip(monic.iter())
        .all(|(a, b)| (a - Complex64::new(*b, 0.0)).norm() <= 1e-8 * scale)
}

/// Aberth-Ehrlich simultaneous iteration on a monic polynomial.
fn aberth(monic: &[f64]) -> Result<Vec<Complex64>> {
    let p = Poly::new(monic.to_vec());
    let dp = p.derivative();
    let n = p.degree();
    let radius = 1.0 + monic[..n].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            Complex64::from_polar(
                0.5 * radius,
                2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64,
            )
        })
        .collect();
    for _ in 0..500 {
        let mut max_step: f64 = 0.0;
        for k in 0..n {
            let ratio = p.eval_c(z[k]) / dp.eval_c(z[k]);
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| Complex64::new(1.0, 0.0) / (z[k] - z[j]))
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if step.re.is_finite() && step.im.is_finite() {
                z[k] -= step;
                max_step = max_step.max(step.norm() / (1.0 + z[k].norm()));
            }
        }
        if max_step < 1e-15 {
            break;
        }
    }
    if z.iter().any(|w| !w.re.is_finite() || !w.im.is_finite()) {
        return Err(Error::RootFinding("Aberth iteration diverged".into()));
    }
    Ok(z)
}

//! Small numeric helpers shared by the evaluators.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative threshold for dropping an imaginary part of a mathematically real quantity.
pub const REAL_COERCION_TOL: f64 = 1e-9;

/// Coerces a complex value known to be real. Imaginary parts above
/// `REAL_COERCION_TOL * (1 + |z|)` are reported as an internal-consistency error.
pub fn coerce_real(z: Complex64, what: &str) -> Result<f64> {
    if z.im.abs() <= REAL_COERCION_TOL * (1.0 + z.norm()) {
        Ok(z.re)
    } else {
        Err(Error::Consistency(format!(
            "{what} should be real but has imaginary part {:e} (value {z})",
            z.im
        )))
    }
}

pub fn coerce_real_vec(v: &[Complex64], what: &str) -> Result<Vec<f64>> {
    v.iter().map(|z| coerce_real(*z, what)).collect()
}

/// Elementary symmetric polynomials `e_1..e_n` of the given values, computed by
/// incremental expansion of `prod (t + v_i)`.
///
/// Returned in ascending order `[e_1, e_2, ..., e_n]`.
pub fn elementary_symmetric(values: &[Complex64]) -> Vec<Complex64> {
    // e[k] holds e_k; e[0] = 1.
    let mut e = vec![Complex64::new(0.0, 0.0); values.len() + 1];
    e[0] = Complex64::new(1.0, 0.0);
    for (n, v) in values.iter().enumerate() {
        for k in (1..=n + 1).rev() {
            let prev = e[k - 1];
            e[k] += prev * v;
        }
    }
    e.remove(0);
    e
}

pub fn product(values: &[Complex64]) -> Complex64 {
    values.iter().fold(Complex64::new(1.0, 0.0), |acc, v| acc * v)
}

/// Pairwise summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Geometric grid of `n` points from `lo` to `hi` (both positive).
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (ratio * i as f64).exp()).collect()
}

pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + h * i as f64).collect()
}

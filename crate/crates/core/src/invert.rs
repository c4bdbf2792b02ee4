//! Numerical Laplace-transform inversion (Abate-Whitt Euler algorithm).

use num_complex::Complex64;

/// Parameters of the Euler algorithm. The discretization error is about
/// `e^{-a}` times a bound on the function.
#[derive(Debug, Clone, Copy)]
pub struct EulerParams {
    pub a: f64,
    pub terms: usize,
    pub euler_terms: usize,
}

impl Default for EulerParams {
    fn default() -> Self {
        EulerParams {
            a: 28.0,
            terms: 200,
            euler_terms: 25,
        }
    }
}

/// Inverts the Laplace transform `transform(p) = int_0^inf e^{-pt} f(t) dt` at
/// `t > 0`.
pub fn euler_inversion<F>(transform: F, t: f64, params: EulerParams) -> f64
where
    F: Fn(Complex64) -> Complex64,
{
    let EulerParams { a, terms, euler_terms } = params;
    let scale = (0.5 * a).exp() / t;
    let term = |k: usize| -> f64 {
        let p = Complex64::new(a, 2.0 * std::f64::consts::PI * k as f64) / (2.0 * t);
        let v = transform(p).re;
        if k == 0 {
            0.5 * v
        } else if k % 2 == 1 {
            -v
        } else {
            v
        }
    };
    let mut partial = Vec::with_capacity(euler_terms + 1);
    let mut sum = 0.0;
    for k in 0..=terms {
        sum += term(k);
    }
    partial.push(sum);
    for k in terms + 1..=terms + euler_terms {
        sum += term(k);
        partial.push(sum);
    }
    // Binomial averaging of the last partial sums.
    let mut binom = 1.0;
    let mut avg = 0.0;
    for (j, s) in partial.iter().enumerate() {
        if j > 0 {
            binom *= (euler_terms - j + 1) as f64 / j as f64;
        }
        avg += binom * s;
    }
    avg /= 2f64.powi(euler_terms as i32);
    scale * avg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_density() {
        for t in [0.1, 1.0, 3.0] {
            let v = euler_inversion(|p| 2.0 / (p + 2.0), t, EulerParams::default());
            assert!((v - 2.0 * (-2.0 * t).exp()).abs() < 1e-7, "{t}: {v}");
        }
    }

    #[test]
    fn distribution_function_with_atom() {
        // P(X <= t) for X = 0 w.p. 0.3 and Exp(1) otherwise
        let cdf = |t: f64| 0.3 + 0.7 * (1.0 - (-t).exp());
        for t in [0.2, 1.5, 4.0] {
            let v = euler_inversion(|p| (0.3 + 0.7 / (1.0 + p)) / p, t, EulerParams::default());
            assert!((v - cdf(t)).abs() < 1e-7, "{t}: {v}");
        }
    }
}

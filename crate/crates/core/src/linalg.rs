//! Dense linear algebra used by the factorization components: matrix
//! exponentials and companion matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a fixed degree-13 Padé
/// approximant.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if n == 1 {
        return DMatrix::from_element(1, 1, a[(0, 0)].exp());
    }
    let norm = norm1(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a / 2f64.powi(squarings);
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("Pade denominator is nonsingular for scaled arguments");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// Companion matrix `(0 -I; rho)` of the negative-side orientation, where
/// `rho_desc = (rho_N, ..., rho_1)`. Its eigenvalues are the roots of
/// `t^N - rho_1 t^{N-1} + ... + (-1)^N rho_N`, i.e. `r_i` when `rho` are the
/// elementary symmetric functions of `r_i`.
pub fn companion_negative(rho_desc: &[f64]) -> DMatrix<f64> {
    let n = rho_desc.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        m[(i, i + 1)] = -1.0;
    }
    for j in 0..n {
        m[(n - 1, j)] = rho_desc[j];
    }
    m
}

/// Companion matrix `(0 I; -rho)` of the positive-side orientation; equal to
/// `-companion_negative(rho_desc)`.
pub fn companion_positive(rho_desc: &[f64]) -> DMatrix<f64> {
    -companion_negative(rho_desc)
}

/// The unit vector `e = (0, ..., 0, 1)^T`.
pub fn unit_last(n: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    if n > 0 {
        e[n - 1] = 1.0;
    }
    e
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Solves `(r I + m) x = b` for complex `r`.
pub fn solve_shifted(m: &DMatrix<f64>, r: Complex64, b: &DVector<f64>) -> Result<DVector<Complex64>> {
    let n = m.nrows();
    let mut a = to_complex(m);
    for i in 0..n {
        a[(i, i)] += r;
    }
    let rhs = b.map(|x| Complex64::new(x, 0.0));
    a.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::OutsideDomain(format!("r = {r} is a pole of the resolvent")))
}

/// Solves `(r I + m) x = b` with complex right-hand side.
pub fn solve_shifted_c(
    m: &DMatrix<f64>,
    r: Complex64,
    b: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    let n = m.nrows();
    let mut a = to_complex(m);
    for i in 0..n {
        a[(i, i)] += r;
    }
    a.lu()
        .solve(b)
        .ok_or_else(|| Error::OutsideDomain(format!("r = {r} is a pole of the resolvent")))
}

/// Row vector times matrix-exponential times `e`: `q e^{m x} e`.
pub fn quad_form_exp(q: &[f64], m: &DMatrix<f64>, x: f64) -> f64 {
    let n = q.len();
    if n == 0 {
        return 0.0;
    }
    let ex = expm(&(m * x));
    (0..n).map(|j| q[j] * ex[(j, n - 1)]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn expm_matches_nalgebra_reference() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 2.5, 4.0, 3.5]);
        for scale in [-10.0, -1.0, -0.01, 0.5, 3.0] {
            let m = &a * scale;
            let ours = expm(&m);
            let reference = m.exp();
            for (x, y) in ours.iter().zip(reference.iter()) {
                assert_relative_eq!(*x, *y, epsilon = 1e-12, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn expm_of_diagonal_is_elementwise() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-3.0, 0.5, 7.0]));
        let e = expm(&a);
        assert_relative_eq!(e[(0, 0)], (-3f64).exp(), max_relative = 1e-13);
        assert_relative_eq!(e[(2, 2)], 7f64.exp(), max_relative = 1e-13);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn companion_eigenvalues_are_the_roots() {
        // roots 1 and 2: rho_1 = 3, rho_2 = 2
        let m = companion_negative(&[2.0, 3.0]);
        let mut eig: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.re).collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(eig[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(eig[1], 2.0, epsilon = 1e-12);
        let p = companion_positive(&[2.0, 3.0]);
        let mut eig: Vec<f64> = p.complex_eigenvalues().iter().map(|z| z.re).collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(eig[0], -2.0, epsilon = 1e-12);
    }
}

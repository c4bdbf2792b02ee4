//! Adaptive Gauss-Kronrod (7/15) quadrature for scalar, complex and
//! vector-valued integrands, with maps for semi-infinite ranges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Integration tolerances; the routine stops once the estimated error is below
/// `max(abs, rel * |I|)`.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-12,
            rel: 1e-10,
            max_intervals: 4000,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance {
            abs,
            rel,
            ..Default::default()
        }
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F>(f: &F, a: f64, b: f64, dim: usize) -> (Vec<f64>, f64)
where
    F: Fn(f64) -> Vec<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let fc = f(center);
    for k in 0..dim {
        kronrod[k] = fc[k] * WGK[7];
        gauss[k] = fc[k] * WG[3];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for k in 0..dim {
            let s = f1[k] + f2[k];
            kronrod[k] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
    }
    let mut err: f64 = 0.0;
    for k in 0..dim {
        kronrod[k] *= half;
        gauss[k] *= half;
        err = err.max((kronrod[k] - gauss[k]).abs());
    }
    (kronrod, err)
}

/// Integrates a vector-valued function over the finite interval `[a, b]`.
pub fn integrate_vec<F>(f: F, a: f64, b: f64, dim: usize, tol: Tolerance) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Vec<f64>,
{
    if a == b {
        return Ok(vec![0.0; dim]);
    }
    let mut heap = BinaryHeap::new();
    let (v, e) = gk15(&f, a, b, dim);
    let mut total = v.clone();
    let mut total_err = e;
    heap.push(Segment { a, b, value: v, error: e });
    let mut count = 1;
    loop {
        let scale = total.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if total_err <= tol.abs.max(tol.rel * scale) {
            break;
        }
        if count >= tol.max_intervals {
            if total_err <= 1e3 * tol.abs.max(tol.rel * scale) {
                break;
            }
            return Err(Error::Numerical(format!(
                "quadrature on [{a}, {b}] did not converge (error estimate {total_err:e})"
            )));
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(&f, worst.a, mid, dim);
        let (v2, e2) = gk15(&f, mid, worst.b, dim);
        for k in 0..dim {
            total[k] += v1[k] + v2[k] - worst.value[k];
        }
        total_err += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
        count += 1;
    }
    // Re-sum from the segments to avoid drift in the running total.
    let mut sum = vec![0.0; dim];
    for seg in heap.iter() {
        for k in 0..dim {
            sum[k] += seg.value[k];
        }
    }
    Ok(sum)
}

pub fn integrate<F>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate_vec(|x| vec![f(x)], a, b, 1, tol).map(|v| v[0])
}

pub fn integrate_c<F>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    integrate_vec(
        |x| {
            let z = f(x);
            vec![z.re, z.im]
        },
        a,
        b,
        2,
        tol,
    )
    .map(|v| Complex64::new(v[0], v[1]))
}

/// Integrates over `[a, inf)` with the map `x = a + scale * t / (1 - t)`.
/// `scale` should be of the order of the integrand's decay length.
pub fn integrate_vec_to_inf<F>(f: F, a: f64, scale: f64, dim: usize, tol: Tolerance) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Vec<f64>,
{
    integrate_vec(
        |t| {
            let one_minus = 1.0 - t;
            let x = a + scale * t / one_minus;
            let jac = scale / (one_minus * one_minus);
            let mut v = f(x);
            for y in v.iter_mut() {
                *y *= jac;
                if !y.is_finite() {
                    *y = 0.0;
                }
            }
            v
        },
        0.0,
        1.0,
        dim,
        tol,
    )
}

pub fn integrate_to_inf<F>(f: F, a: f64, scale: f64, tol: Tolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate_vec_to_inf(|x| vec![f(x)], a, scale, 1, tol).map(|v| v[0])
}

/// Integrates over `(-inf, b]`.
pub fn integrate_from_neg_inf<F>(f: F, b: f64, scale: f64, tol: Tolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate_to_inf(|y| f(-y), -b, scale, tol)
}

pub fn integrate_c_to_inf<F>(f: F, a: f64, scale: f64, tol: Tolerance) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    integrate_vec_to_inf(
        |x| {
            let z = f(x);
            vec![z.re, z.im]
        },
        a,
        scale,
        2,
        tol,
    )
    .map(|v| Complex64::new(v[0], v[1]))
}

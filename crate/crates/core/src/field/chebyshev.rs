//! Chebyshev–Gauss–Lobatto collocation in the wall-normal direction.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::quadrature::clenshaw_curtis;

/// Nodes, weights, transforms and differentiation matrices for `n`
/// Chebyshev–Gauss–Lobatto points on [-1, 1] (first node is z = +1).
#[derive(Debug, Clone)]
pub struct ChebyshevBasis {
    pub n: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// nodal values = `to_nodal * coefficients`
    pub to_nodal: DMatrix<f64>,
    /// coefficients = `to_coeffs * nodal values`
    pub to_coeffs: DMatrix<f64>,
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
    // transposes, for right-multiplication of row-stored data
    pub(crate) d1t: DMatrix<f64>,
    pub(crate) d2t: DMatrix<f64>,
    pub(crate) to_nodal_t: DMatrix<f64>,
    pub(crate) to_coeffs_t: DMatrix<f64>,
}

/// `cos(pi p / m)` with the argument reduced first, so that symmetric
/// entries come out bit-identical.
fn cos_pi_ratio(p: usize, m: usize) -> f64 {
    let p = p % (2 * m);
    let p = if p > m { 2 * m - p } else { p };
    // cos(pi p/m) = -sin(pi (2p - m) / (2m))
    -(PI * (2.0 * p as f64 - m as f64) / (2.0 * m as f64)).sin()
}

impl ChebyshevBasis {
    pub fn new(n: usize) -> Self {
        assert!(n >= 3, "need at least three Chebyshev points");
        let rule = clenshaw_curtis(n);
        let m = n - 1;
        let to_nodal = DMatrix::from_fn(n, n, |j, k| cos_pi_ratio(j * k, m));
        let c = |j: usize| if j == 0 || j == m { 2.0 } else { 1.0 };
        let to_coeffs =
            DMatrix::from_fn(n, n, |k, j| 2.0 / (m as f64 * c(k) * c(j)) * cos_pi_ratio(j * k, m));

        let mut d1 = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                // x_i - x_j = 2 sin(pi (i + j) / 2m) sin(pi (j - i) / 2m)
                let diff = 2.0
                    * (PI * (i + j) as f64 / (2.0 * m as f64)).sin()
                    * (PI * (j as f64 - i as f64) / (2.0 * m as f64)).sin();
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                d1[(i, j)] = c(i) / c(j) * sign / diff;
            }
        }
        for i in 0..n {
            let s: f64 = (0..n).filter(|&j| j != i).map(|j| d1[(i, j)]).sum();
            d1[(i, i)] = -s;
        }
        let mut d2 = &d1 * &d1;
        for i in 0..n {
            let s: f64 = (0..n).filter(|&j| j != i).map(|j| d2[(i, j)]).sum();
            d2[(i, i)] = -s;
        }
        ChebyshevBasis {
            n,
            nodes: rule.nodes,
            weights: rule.weights,
            d1t: d1.transpose(),
            d2t: d2.transpose(),
            to_nodal_t: to_nodal.transpose(),
            to_coeffs_t: to_coeffs.transpose(),
            to_nodal,
            to_coeffs,
            d1,
            d2,
        }
    }

    /// Shared instance for `n` points.
    pub fn cached(n: usize) -> Arc<ChebyshevBasis> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<ChebyshevBasis>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().expect("basis cache poisoned");
        map.entry(n).or_insert_with(|| Arc::new(ChebyshevBasis::new(n))).clone()
    }

    /// Evaluate a Chebyshev series at `z` (Clenshaw recurrence).
    pub fn evaluate(coeffs: &[f64], z: f64) -> f64 {
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &a in coeffs.iter().skip(1).rev() {
            let b0 = a + 2.0 * z * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        coeffs.first().copied().unwrap_or(0.0) + z * b1 - b2
    }
}

/// Coefficients of the derivative of a Chebyshev series, by the backward
/// recurrence `b_k = b_{k+2} + 2 (k + 1) a_{k+1}`.
pub fn derivative_coeffs<T>(a: &[T]) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = a.len();
    let mut b = vec![T::default(); n];
    if n < 2 {
        return b;
    }
    for k in (0..n - 1).rev() {
        let next = if k + 2 < n { b[k + 2] } else { T::default() };
        b[k] = next + a[k + 1] * (2.0 * (k + 1) as f64);
    }
    b[0] = b[0] * 0.5;
    b
}

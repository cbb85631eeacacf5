//! Quadrature on the reference triangle `{(x, y) : x, y >= 0, x + y <= 1}`.
//!
//! Rules are conical (collapsed) products of Gauss-Legendre rules: the map
//! `(s, t) -> (s (1 - t), t)` takes the unit square onto the triangle with
//! Jacobian `1 - t`. With `n` points per direction a polynomial of total
//! degree `d` pulls back to degree `d` in `s` and `d + 1` in `t`, so the rule
//! is exact up to degree `2n - 2`. All weights are positive.

use crate::error::{Error, Result};

/// Highest degree for which a rule is provided.
pub const MAX_DEGREE: u32 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    /// Barycentric coordinates `(1 - x - y, x, y)`.
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub exact_degree: u32,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Smallest conical product rule that is exact for `min_degree`.
pub fn quadrature_rule(min_degree: u32) -> Result<QuadratureRule> {
    if min_degree > MAX_DEGREE {
        return Err(Error::Capacity(format!(
            "no triangle rule tabulated for degree {min_degree} (max {MAX_DEGREE})"
        )));
    }
    let n = (min_degree as usize + 3) / 2;
    let (x, w) = gauss_legendre_unit(n);

    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&t, &wt) in x.iter().zip(&w) {
        for (&s, &ws) in x.iter().zip(&w) {
            let px = s * (1.0 - t);
            let py = t;
            points.push([1.0 - px - py, px, py]);
            weights.push(ws * wt * (1.0 - t));
        }
    }
    Ok(QuadratureRule {
        points,
        weights,
        exact_degree: 2 * n as u32 - 2,
    })
}

/// `n`-point Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-like initial guess for the i-th root on [-1, 1]
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

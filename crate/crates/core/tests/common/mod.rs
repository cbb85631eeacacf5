//! Independent dense reference implementation of the least-squares systems.
//!
//! Basis functions come from inverting a monomial Vandermonde matrix on the
//! physical element, quadrature from a Golub-Welsch Gauss rule on a collapsed
//! square, and the residual operators are written out by hand.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use fosls_core::fem::FeSpace;

/// Gauss-Legendre rule on [0, 1] from the eigenvalues of the Jacobi matrix.
pub fn golub_welsch(n: usize) -> Vec<(f64, f64)> {
    let mut j = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut out: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let v = eig.eigenvectors[(0, i)];
            ((x + 1.0) / 2.0, v * v)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Quadrature on the triangle with the given vertices: `(x, y, weight)`.
pub fn triangle_rule(v: [[f64; 2]; 3], n: usize) -> Vec<(f64, f64, f64)> {
    let g = golub_welsch(n);
    let area2 = ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1])
        - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]))
        .abs();
    let mut out = Vec::new();
    for &(s, ws) in &g {
        for &(t, wt) in &g {
            // Duffy map of the unit square onto the reference triangle.
            let xi = s * (1.0 - t);
            let eta = s * t;
            let w = ws * wt * s * area2;
            let x = v[0][0] + xi * (v[1][0] - v[0][0]) + eta * (v[2][0] - v[0][0]);
            let y = v[0][1] + xi * (v[1][1] - v[0][1]) + eta * (v[2][1] - v[0][1]);
            out.push((x, y, w));
        }
    }
    out
}

fn monomials(p: usize) -> Vec<(i32, i32)> {
    let mut m = Vec::new();
    for total in 0..=p as i32 {
        for a in 0..=total {
            m.push((total - a, a));
        }
    }
    m
}

/// Nodal basis on one element, represented by monomial coefficients.
pub struct LocalBasis {
    exps: Vec<(i32, i32)>,
    coeffs: DMatrix<f64>,
    center: [f64; 2],
}

impl LocalBasis {
    pub fn new(p: usize, nodes: &[[f64; 2]]) -> Self {
        let exps = monomials(p);
        assert_eq!(exps.len(), nodes.len());
        let center = [
            nodes.iter().map(|n| n[0]).sum::<f64>() / nodes.len() as f64,
            nodes.iter().map(|n| n[1]).sum::<f64>() / nodes.len() as f64,
        ];
        let v = DMatrix::from_fn(nodes.len(), exps.len(), |i, j| {
            let (a, b) = exps[j];
            (nodes[i][0] - center[0]).powi(a) * (nodes[i][1] - center[1]).powi(b)
        });
        // Column i of the inverse holds the coefficients of basis function i.
        let coeffs = v.try_inverse().expect("unisolvent nodes");
        LocalBasis {
            exps,
            coeffs,
            center,
        }
    }

    /// Values and gradients of all basis functions at `(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> (Vec<f64>, Vec<[f64; 2]>) {
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        let n = self.exps.len();
        let mut phi = DVector::zeros(n);
        let mut gx = DVector::zeros(n);
        let mut gy = DVector::zeros(n);
        for (j, &(a, b)) in self.exps.iter().enumerate() {
            phi[j] = dx.powi(a) * dy.powi(b);
            gx[j] = if a > 0 {
                a as f64 * dx.powi(a - 1) * dy.powi(b)
            } else {
                0.0
            };
            gy[j] = if b > 0 {
                b as f64 * dx.powi(a) * dy.powi(b - 1)
            } else {
                0.0
            };
        }
        let c = self.coeffs.transpose();
        let v = &c * phi;
        let ggx = &c * gx;
        let ggy = &c * gy;
        (
            v.iter().copied().collect(),
            (0..n).map(|i| [ggx[i], ggy[i]]).collect(),
        )
    }
}

/// Residual component coefficients of a single scalar basis function placed
/// in field `f`: returns one value per residual component.
pub type Residual = fn(f: usize, phi: f64, grad: [f64; 2], r: f64) -> Vec<f64>;

pub fn heat_residual(f: usize, phi: f64, g: [f64; 2], r: f64) -> Vec<f64> {
    // -div V + r u, V - grad u, curl V
    match f {
        0 => vec![r * phi, -g[0], -g[1], 0.0],
        1 => vec![-g[0], phi, 0.0, -g[1]],
        2 => vec![-g[1], 0.0, phi, g[0]],
        _ => unreachable!(),
    }
}

pub fn stokes_residual(f: usize, phi: f64, g: [f64; 2], r: f64) -> Vec<f64> {
    let mut c = vec![0.0; 11];
    match f {
        0 => {
            c[0] = r * phi;
            c[2] = g[0];
            c[3] = -g[0];
            c[4] = -g[1];
        }
        1 => {
            c[1] = r * phi;
            c[2] = g[1];
            c[5] = -g[0];
            c[6] = -g[1];
        }
        2 => {
            // V11
            c[0] = -g[0];
            c[3] = phi;
            c[7] = -g[1];
            c[9] = g[0];
            c[10] = g[1];
        }
        3 => {
            // V12
            c[0] = -g[1];
            c[4] = phi;
            c[7] = g[0];
        }
        4 => {
            // V21
            c[1] = -g[0];
            c[5] = phi;
            c[8] = -g[1];
        }
        5 => {
            // V22
            c[1] = -g[1];
            c[6] = phi;
            c[8] = g[0];
            c[9] = g[0];
            c[10] = g[1];
        }
        6 => {
            c[0] = g[0];
            c[1] = g[1];
        }
        _ => unreachable!(),
    }
    c
}

pub struct Oracle {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub mean: DVector<f64>,
}

fn on_side(x: f64, y: f64) -> (bool, bool) {
    let vertical = x == 0.0 || x == 1.0;
    let horizontal = y == 0.0 || y == 1.0;
    (vertical, horizontal)
}

/// Constrained flags, by field, from nodal coordinates.
pub fn heat_constrained(space: &FeSpace) -> Vec<bool> {
    let mut out = Vec::new();
    for f in 0..3 {
        for &[x, y] in space.dof_coords() {
            let (v, h) = on_side(x, y);
            out.push(match f {
                0 => v || h,
                1 => h,
                _ => v,
            });
        }
    }
    out
}

/// Off-diagonal gradient entries fixed on every side.
pub fn stokes_constrained(space: &FeSpace) -> Vec<bool> {
    let mut out = Vec::new();
    for f in 0..7 {
        for &[x, y] in space.dof_coords() {
            let (v, h) = on_side(x, y);
            out.push(match f {
                0 => v,
                1 => h,
                3 | 4 => v || h,
                _ => false,
            });
        }
    }
    out
}

/// Dense least-squares matrix and right-hand side with symmetric
/// elimination; `sources[c]` is the data coefficient vector of component `c`.
pub fn assemble(
    space: &FeSpace,
    n_fields: usize,
    n_components: usize,
    residual: Residual,
    r: f64,
    constrained: &[bool],
    sources: &[(usize, &[f64])],
) -> Oracle {
    let nd = space.ndofs();
    let n = n_fields * nd;
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    let mut mean = DVector::zeros(nd);
    let p = space.order();
    let verts = space.mesh().vertices();
    for (e, tri) in space.mesh().triangles().iter().enumerate() {
        let dofs = space.element_dofs(e);
        let nodes: Vec<[f64; 2]> = dofs.iter().map(|&d| space.dof_coords()[d]).collect();
        let basis = LocalBasis::new(p, &nodes);
        let v = [verts[tri[0]], verts[tri[1]], verts[tri[2]]];
        for (x, y, w) in triangle_rule(v, 8) {
            let (phi, grad) = basis.eval(x, y);
            let rows: Vec<Vec<Vec<f64>>> = (0..n_fields)
                .map(|f| {
                    (0..dofs.len())
                        .map(|i| residual(f, phi[i], grad[i], r))
                        .collect()
                })
                .collect();
            let mut data = vec![0.0; n_components];
            for &(c, coeffs) in sources {
                data[c] = r * dofs
                    .iter()
                    .zip(&phi)
                    .map(|(&d, &ph)| coeffs[d] * ph)
                    .sum::<f64>();
            }
            for f in 0..n_fields {
                for (i, &di) in dofs.iter().enumerate() {
                    let gi = f * nd + di;
                    let ri = &rows[f][i];
                    b[gi] += w * ri.iter().zip(&data).map(|(x, y)| x * y).sum::<f64>();
                    for g in 0..n_fields {
                        for (j, &dj) in dofs.iter().enumerate() {
                            let rj = &rows[g][j];
                            a[(gi, g * nd + dj)] +=
                                w * ri.iter().zip(rj).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                }
            }
            for (i, &di) in dofs.iter().enumerate() {
                mean[di] += w * phi[i];
            }
        }
    }
    for (k, &c) in constrained.iter().enumerate() {
        if c {
            a.row_mut(k).fill(0.0);
            a.column_mut(k).fill(0.0);
            a[(k, k)] = 1.0;
            b[k] = 0.0;
        }
    }
    Oracle {
        matrix: a,
        rhs: b,
        mean,
    }
}

/// Largest entrywise difference relative to the largest entry of `reference`.
pub fn relative_defect(a: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    (a - reference).amax() / reference.amax().max(1.0)
}

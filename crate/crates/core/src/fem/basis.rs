//! Nodal Lagrange shape functions on the reference triangle.
//!
//! A node is a multi-index `(i1, i2, i3)` with `i1 + i2 + i3 = p`, located at
//! barycentric point `(i1, i2, i3) / p`. The shape function for that node is
//! `R_i1(l1) R_i2(l2) R_i3(l3)` with `R_m(z) = prod_{s<m} (p z - s) / (s + 1)`.
//!
//! Local ordering: the three vertices, then edge nodes along (v0,v1), (v1,v2),
//! (v2,v0), then interior nodes.

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LagrangeBasis {
    order: usize,
    nodes: Vec<[usize; 3]>,
}

impl LagrangeBasis {
    pub fn new(order: usize) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(Error::Domain(format!(
                "finite-element order {order} not in 1..={MAX_ORDER}"
            )));
        }
        let p = order;
        let mut nodes = vec![[p, 0, 0], [0, p, 0], [0, 0, p]];
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            for t in 1..p {
                let mut m = [0; 3];
                m[a] = p - t;
                m[b] = t;
                nodes.push(m);
            }
        }
        for i2 in 1..p {
            for i3 in 1..p {
                if i2 + i3 < p {
                    nodes.push([p - i2 - i3, i2, i3]);
                }
            }
        }
        debug_assert_eq!(nodes.len(), (p + 1) * (p + 2) / 2);
        Ok(LagrangeBasis { order, nodes })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Barycentric multi-indices of the nodes, scaled by `p`.
    pub fn nodes(&self) -> &[[usize; 3]] {
        &self.nodes
    }

    /// Barycentric coordinates of node `a`.
    pub fn node_point(&self, a: usize) -> [f64; 3] {
        let p = self.order as f64;
        self.nodes[a].map(|i| i as f64 / p)
    }

    /// Values and reference gradients `(d/dx, d/dy)` at barycentric `point`.
    pub fn eval(&self, point: [f64; 3]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let p = self.order;
        // r[c][m] = (R_m(l_c), R_m'(l_c)) for m = 0..=p
        let r: Vec<Vec<(f64, f64)>> = point
            .iter()
            .map(|&z| (0..=p).map(|m| factor(p, m, z)).collect())
            .collect();

        let mut values = Vec::with_capacity(self.len());
        let mut grads = Vec::with_capacity(self.len());
        for &[i1, i2, i3] in &self.nodes {
            let (a, da) = r[0][i1];
            let (b, db) = r[1][i2];
            let (c, dc) = r[2][i3];
            values.push(a * b * c);
            // derivatives with respect to the barycentric coordinates
            let d1 = da * b * c;
            let d2 = a * db * c;
            let d3 = a * b * dc;
            // l1 = 1 - x - y, l2 = x, l3 = y
            grads.push([d2 - d1, d3 - d1]);
        }
        (values, grads)
    }
}

/// `R_m(z)` and its derivative.
fn factor(p: usize, m: usize, z: f64) -> (f64, f64) {
    let pf = p as f64;
    let mut val = 1.0;
    let mut der = 0.0;
    for s in 0..m {
        let sf = s as f64;
        let lin = (pf * z - sf) / (sf + 1.0);
        let dlin = pf / (sf + 1.0);
        der = der * lin + val * dlin;
        val *= lin;
    }
    (val, der)
}

/// Values and reference gradients of the order-`order` basis at `point`.
pub fn eval_basis(order: usize, point: [f64; 3]) -> Result<(Vec<f64>, Vec<[f64; 2]>)> {
    Ok(LagrangeBasis::new(order)?.eval(point))
}

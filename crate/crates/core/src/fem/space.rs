use std::collections::{BTreeMap, BTreeSet};

use super::basis::LagrangeBasis;
use super::quadrature::{quadrature_rule, QuadratureRule};
use crate::error::Result;
use crate::mesh::{on_sides, Mesh, Side};

/// Affine map `x = origin + J xi` of one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub origin: [f64; 2],
    /// Columns are the edge vectors `v1 - v0` and `v2 - v0`.
    pub jacobian: [[f64; 2]; 2],
    /// `J^{-T}`, maps reference gradients to physical ones.
    pub inv_transpose: [[f64; 2]; 2],
    pub det: f64,
}

impl ElementGeometry {
    fn new(v: [[f64; 2]; 3]) -> Self {
        let j = [
            [v[1][0] - v[0][0], v[2][0] - v[0][0]],
            [v[1][1] - v[0][1], v[2][1] - v[0][1]],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let inv_transpose = [
            [j[1][1] / det, -j[1][0] / det],
            [-j[0][1] / det, j[0][0] / det],
        ];
        ElementGeometry {
            origin: v[0],
            jacobian: j,
            inv_transpose,
            det,
        }
    }

    /// Physical point of barycentric coordinates `l`.
    pub fn map(&self, l: [f64; 3]) -> [f64; 2] {
        let j = &self.jacobian;
        [
            self.origin[0] + j[0][0] * l[1] + j[0][1] * l[2],
            self.origin[1] + j[1][0] * l[1] + j[1][1] * l[2],
        ]
    }

    pub fn physical_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let k = &self.inv_transpose;
        [
            k[0][0] * g[0] + k[0][1] * g[1],
            k[1][0] * g[0] + k[1][1] * g[1],
        ]
    }
}

/// Basis values and reference gradients tabulated at the points of a rule.
#[derive(Debug, Clone)]
pub struct QuadratureTable {
    pub rule: QuadratureRule,
    pub nloc: usize,
    values: Vec<f64>,
    ref_grads: Vec<[f64; 2]>,
}

impl QuadratureTable {
    pub fn new(basis: &LagrangeBasis, min_degree: u32) -> Result<Self> {
        let rule = quadrature_rule(min_degree)?;
        let nloc = basis.len();
        let mut values = Vec::with_capacity(rule.len() * nloc);
        let mut ref_grads = Vec::with_capacity(rule.len() * nloc);
        for &pt in &rule.points {
            let (v, g) = basis.eval(pt);
            values.extend(v);
            ref_grads.extend(g);
        }
        Ok(QuadratureTable {
            rule,
            nloc,
            values,
            ref_grads,
        })
    }

    pub fn values(&self, q: usize) -> &[f64] {
        &self.values[q * self.nloc..(q + 1) * self.nloc]
    }

    pub fn ref_grads(&self, q: usize) -> &[[f64; 2]] {
        &self.ref_grads[q * self.nloc..(q + 1) * self.nloc]
    }
}

/// Continuous Lagrange space of order `p` on a uniform mesh.
///
/// Every Lagrange node of every triangle falls on the lattice of spacing
/// `h / p`; node `(gx, gy)` of that lattice is DOF `gy (p 2^l + 1) + gx`. Shared
/// edges and vertices therefore share DOFs without any matching pass.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Mesh,
    basis: LagrangeBasis,
    ndofs: usize,
    element_dofs: Vec<usize>,
    dof_coords: Vec<[f64; 2]>,
    boundary_dofs: BTreeMap<Side, BTreeSet<usize>>,
    geometry: Vec<ElementGeometry>,
}

impl FeSpace {
    pub fn new(mesh: Mesh, order: usize) -> Result<Self> {
        let basis = LagrangeBasis::new(order)?;
        let p = order;
        let n = mesh.cells_per_side();
        let lattice = p * n;
        let side = lattice + 1;
        let ndofs = side * side;

        let dof_coords = (0..ndofs)
            .map(|d| {
                [
                    (d % side) as f64 / lattice as f64,
                    (d / side) as f64 / lattice as f64,
                ]
            })
            .collect::<Vec<_>>();

        let mut element_dofs = Vec::with_capacity(mesh.triangles().len() * basis.len());
        let mut geometry = Vec::with_capacity(mesh.triangles().len());
        for tri in mesh.triangles() {
            // vertex grid coordinates
            let g = tri.map(|v| [v % (n + 1), v / (n + 1)]);
            for m in basis.nodes() {
                let gx = m[0] * g[0][0] + m[1] * g[1][0] + m[2] * g[2][0];
                let gy = m[0] * g[0][1] + m[1] * g[1][1] + m[2] * g[2][1];
                element_dofs.push(gy * side + gx);
            }
            geometry.push(ElementGeometry::new(tri.map(|v| mesh.vertices()[v])));
        }

        let mut boundary_dofs: BTreeMap<Side, BTreeSet<usize>> =
            Side::ALL.iter().map(|&s| (s, BTreeSet::new())).collect();
        for (d, &[x, y]) in dof_coords.iter().enumerate() {
            for s in on_sides(x, y) {
                boundary_dofs.get_mut(&s).unwrap().insert(d);
            }
        }

        Ok(FeSpace {
            mesh,
            basis,
            ndofs,
            element_dofs,
            dof_coords,
            boundary_dofs,
            geometry,
        })
    }

    /// Uniform mesh at `level` with an order-`order` space on it.
    pub fn uniform(level: u32, order: usize) -> Result<Self> {
        FeSpace::new(Mesh::uniform(level)?, order)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn order(&self) -> usize {
        self.basis.order()
    }

    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    pub fn ndofs(&self) -> usize {
        self.ndofs
    }

    pub fn num_elements(&self) -> usize {
        self.geometry.len()
    }

    /// Local DOF count per triangle.
    pub fn nloc(&self) -> usize {
        self.basis.len()
    }

    pub fn element_dofs(&self, e: usize) -> &[usize] {
        let k = self.nloc();
        &self.element_dofs[e * k..(e + 1) * k]
    }

    pub fn geometry(&self, e: usize) -> &ElementGeometry {
        &self.geometry[e]
    }

    pub fn dof_coords(&self) -> &[[f64; 2]] {
        &self.dof_coords
    }

    pub fn boundary_dofs(&self, side: Side) -> &BTreeSet<usize> {
        &self.boundary_dofs[&side]
    }

    /// Boolean mask of DOFs lying on any of `sides`.
    pub fn dof_mask(&self, sides: &[Side]) -> Vec<bool> {
        let mut mask = vec![false; self.ndofs];
        for s in sides {
            for &d in self.boundary_dofs(*s) {
                mask[d] = true;
            }
        }
        mask
    }

    /// Two spaces are compatible when they were built from the same level and order.
    pub fn same_as(&self, other: &FeSpace) -> bool {
        std::ptr::eq(self, other)
            || (self.mesh.level() == other.mesh.level() && self.order() == other.order())
    }

    /// Basis tabulation for a rule exact to `min_degree`.
    pub fn table(&self, min_degree: u32) -> Result<QuadratureTable> {
        QuadratureTable::new(&self.basis, min_degree)
    }

    /// Sorted DOF adjacency: `j` is a neighbour of `i` when some triangle holds both.
    pub fn dof_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.ndofs];
        for e in 0..self.num_elements() {
            let dofs = self.element_dofs(e);
            for &i in dofs {
                adj[i].extend_from_slice(dofs);
            }
        }
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
        }
        adj
    }
}

//! Generic assembly of least-squares normal equations for first-order systems.
//!
//! A first-order operator is a list of scalar residual components, each a
//! linear combination of field values and first derivatives. All fields share
//! one [`FeSpace`]; global unknown `f * ndofs + d` is DOF `d` of field `f`.
//! The bilinear form is `<L phi_j, L phi_i>` summed over the components.

use crate::fem::{FeSpace, QuadratureTable};
use crate::linalg::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deriv {
    Value,
    Dx,
    Dy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub field: usize,
    pub deriv: Deriv,
    pub coef: f64,
}

pub(crate) const fn term(field: usize, deriv: Deriv, coef: f64) -> Term {
    Term { field, deriv, coef }
}

/// Data for one component of the right-hand side: `scale * g` where `g` is a
/// finite-element function given by its coefficients.
#[derive(Debug, Clone, Copy)]
pub struct Source<'a> {
    pub component: usize,
    pub scale: f64,
    pub coeffs: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderOperator {
    n_fields: usize,
    components: Vec<Vec<Term>>,
}

/// Per-element, per-quadrature-point residual rows restricted to nonzeros.
struct LocalRows {
    /// `rows[c]` lists `(local index, value)` for component `c`.
    rows: Vec<Vec<(usize, f64)>>,
}

impl FirstOrderOperator {
    pub fn new(n_fields: usize, components: Vec<Vec<Term>>) -> Self {
        assert!(components.iter().flatten().all(|t| t.field < n_fields));
        FirstOrderOperator {
            n_fields,
            components,
        }
    }

    pub fn n_fields(&self) -> usize {
        self.n_fields
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Vec<Term>] {
        &self.components
    }

    /// `coupled[f][g]` when some component involves both fields.
    pub fn coupling(&self) -> Vec<Vec<bool>> {
        let mut c = vec![vec![false; self.n_fields]; self.n_fields];
        for comp in &self.components {
            for a in comp {
                for b in comp {
                    c[a.field][b.field] = true;
                }
            }
        }
        c
    }

    /// Zero matrix carrying the block sparsity of the operator on `space`.
    pub fn pattern(&self, space: &FeSpace) -> CsrMatrix {
        let n = space.ndofs();
        let adj = space.dof_adjacency();
        let coupling = self.coupling();
        let mut rows = Vec::with_capacity(self.n_fields * n);
        for f in 0..self.n_fields {
            for nbrs in &adj {
                let mut row = Vec::new();
                for g in 0..self.n_fields {
                    if coupling[f][g] {
                        row.extend(nbrs.iter().map(|&j| g * n + j));
                    }
                }
                rows.push(row);
            }
        }
        CsrMatrix::from_pattern(self.n_fields * n, &rows)
    }

    fn local_rows(
        &self,
        table: &QuadratureTable,
        q: usize,
        phys_grads: &[[f64; 2]],
        out: &mut LocalRows,
    ) {
        let nloc = table.nloc;
        let values = table.values(q);
        for (comp, row) in self.components.iter().zip(out.rows.iter_mut()) {
            row.clear();
            for t in comp {
                for a in 0..nloc {
                    let v = match t.deriv {
                        Deriv::Value => values[a],
                        Deriv::Dx => phys_grads[a][0],
                        Deriv::Dy => phys_grads[a][1],
                    };
                    row.push((t.field * nloc + a, t.coef * v));
                }
            }
            // merge repeated local indices (a field used twice in one component)
            row.sort_by_key(|&(i, _)| i);
            row.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
        }
    }

    /// Walks all elements and quadrature points, handing the caller the element
    /// index, the physical weight, the residual rows and the basis values.
    fn for_each_point(
        &self,
        space: &FeSpace,
        table: &QuadratureTable,
        mut visit: impl FnMut(usize, f64, &LocalRows, &[f64]),
    ) {
        let nloc = table.nloc;
        let mut rows = LocalRows {
            rows: vec![Vec::new(); self.components.len()],
        };
        let mut grads = vec![[0.0; 2]; nloc];
        for e in 0..space.num_elements() {
            let geo = space.geometry(e);
            for q in 0..table.rule.len() {
                for (g, rg) in grads.iter_mut().zip(table.ref_grads(q)) {
                    *g = geo.physical_gradient(*rg);
                }
                self.local_rows(table, q, &grads, &mut rows);
                let w = table.rule.weights[q] * geo.det.abs();
                visit(e, w, &rows, table.values(q));
            }
        }
    }

    fn global_index(&self, space: &FeSpace, e: usize, local: usize, nloc: usize) -> usize {
        let (f, a) = (local / nloc, local % nloc);
        f * space.ndofs() + space.element_dofs(e)[a]
    }

    /// Normal-equation matrix without boundary conditions.
    pub fn assemble(&self, space: &FeSpace, table: &QuadratureTable) -> CsrMatrix {
        let nloc = table.nloc;
        let nl = nloc * self.n_fields;
        let mut matrix = self.pattern(space);
        let mut local = vec![0.0; nl * nl];
        let mut current = usize::MAX;

        let flush = |e: usize, local: &mut [f64], matrix: &mut CsrMatrix| {
            for i in 0..nl {
                let gi = self.global_index(space, e, i, nloc);
                for j in 0..nl {
                    let v = local[i * nl + j];
                    if v != 0.0 {
                        matrix.add(gi, self.global_index(space, e, j, nloc), v);
                    }
                }
            }
            local.fill(0.0);
        };

        self.for_each_point(space, table, |e, w, rows, _| {
            if e != current {
                if current != usize::MAX {
                    flush(current, &mut local, &mut matrix);
                }
                current = e;
            }
            for row in &rows.rows {
                for (k, &(i, ri)) in row.iter().enumerate() {
                    let wi = w * ri;
                    for &(j, rj) in &row[k..] {
                        let v = wi * rj;
                        local[i * nl + j] += v;
                        if i != j {
                            local[j * nl + i] += v;
                        }
                    }
                }
            }
        });
        if current != usize::MAX {
            flush(current, &mut local, &mut matrix);
        }
        matrix
    }

    /// Load vector `<F, L phi_i>` without boundary conditions.
    pub fn rhs(&self, space: &FeSpace, table: &QuadratureTable, sources: &[Source]) -> Vec<f64> {
        let nloc = table.nloc;
        let mut b = vec![0.0; self.n_fields * space.ndofs()];
        let mut data = vec![0.0; self.components.len()];
        self.for_each_point(space, table, |e, w, rows, values| {
            let dofs = space.element_dofs(e);
            source_values(sources, dofs, values, &mut data);
            for (row, &fc) in rows.rows.iter().zip(&data) {
                if fc == 0.0 {
                    continue;
                }
                for &(i, ri) in row {
                    b[self.global_index(space, e, i, nloc)] += w * ri * fc;
                }
            }
        });
        b
    }

    /// Weak residual `<L x - F, L phi_i>` for every unknown, integrated
    /// element by element without using the assembled matrix.
    pub fn weak_residual(
        &self,
        space: &FeSpace,
        table: &QuadratureTable,
        x: &[f64],
        sources: &[Source],
    ) -> Vec<f64> {
        let nloc = table.nloc;
        let mut r = vec![0.0; self.n_fields * space.ndofs()];
        let mut data = vec![0.0; self.components.len()];
        self.for_each_point(space, table, |e, w, rows, values| {
            let dofs = space.element_dofs(e);
            source_values(sources, dofs, values, &mut data);
            for (row, &fc) in rows.rows.iter().zip(&data) {
                let lx: f64 = row
                    .iter()
                    .map(|&(i, ri)| ri * x[self.global_index(space, e, i, nloc)])
                    .sum();
                let res = lx - fc;
                for &(i, ri) in row {
                    r[self.global_index(space, e, i, nloc)] += w * ri * res;
                }
            }
        });
        r
    }

    /// `||L x - F||^2` over the domain.
    pub fn functional(
        &self,
        space: &FeSpace,
        table: &QuadratureTable,
        x: &[f64],
        sources: &[Source],
    ) -> f64 {
        let nloc = table.nloc;
        let mut total = 0.0;
        let mut data = vec![0.0; self.components.len()];
        self.for_each_point(space, table, |e, w, rows, values| {
            let dofs = space.element_dofs(e);
            source_values(sources, dofs, values, &mut data);
            for (row, &fc) in rows.rows.iter().zip(&data) {
                let lx: f64 = row
                    .iter()
                    .map(|&(i, ri)| ri * x[self.global_index(space, e, i, nloc)])
                    .sum();
                total += w * (lx - fc).powi(2);
            }
        });
        total
    }
}

fn source_values(sources: &[Source], dofs: &[usize], values: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for s in sources {
        let g: f64 = dofs
            .iter()
            .zip(values)
            .map(|(&d, &phi)| s.coeffs[d] * phi)
            .sum();
        out[s.component] += s.scale * g;
    }
}

/// Global mask over all fields: `per_field[f]` marks the constrained DOFs of field `f`.
pub(crate) fn block_mask(ndofs: usize, per_field: &[Vec<bool>]) -> Vec<bool> {
    let mut mask = Vec::with_capacity(ndofs * per_field.len());
    for m in per_field {
        assert_eq!(m.len(), ndofs);
        mask.extend_from_slice(m);
    }
    mask
}

//! Uniform triangulations of the unit square.
//!
//! Level `l` splits the square into `2^l x 2^l` cells of side `h = 2^-l`, and
//! every cell is cut along its bottom-left to top-right diagonal. Vertex
//! `(i, j)` sits at `(i h, j h)` and has index `j (2^l + 1) + i`.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// Largest supported refinement level.
pub const MAX_LEVEL: u32 = 12;

/// One side of the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    /// Whether the side is `x = const`.
    pub fn is_vertical(self) -> bool {
        matches!(self, Side::Left | Side::Right)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    level: u32,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<([usize; 2], Side)>,
}

impl Mesh {
    /// Builds the uniform mesh at refinement `level`.
    pub fn uniform(level: u32) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::Capacity(format!(
                "mesh level {level} exceeds the maximum of {MAX_LEVEL}"
            )));
        }
        let n = 1usize << level;
        let h = 1.0 / n as f64;
        let idx = |i: usize, j: usize| j * (n + 1) + i;

        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }

        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }

        let mut boundary_edges = Vec::with_capacity(4 * n);
        for k in 0..n {
            boundary_edges.push(([idx(0, k), idx(0, k + 1)], Side::Left));
            boundary_edges.push(([idx(n, k), idx(n, k + 1)], Side::Right));
            boundary_edges.push(([idx(k, 0), idx(k + 1, 0)], Side::Bottom));
            boundary_edges.push(([idx(k, n), idx(k + 1, n)], Side::Top));
        }

        Ok(Mesh {
            level,
            vertices,
            triangles,
            boundary_edges,
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Number of cells per side, `2^level`.
    pub fn cells_per_side(&self) -> usize {
        1 << self.level
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells_per_side() as f64
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Counterclockwise vertex triples.
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[([usize; 2], Side)] {
        &self.boundary_edges
    }

    /// Signed area of triangle `t`; positive for counterclockwise ordering.
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Boundary vertex sets per side. Corners appear in two sets.
    pub fn classify_boundary(&self) -> BTreeMap<Side, BTreeSet<usize>> {
        let mut sides: BTreeMap<Side, BTreeSet<usize>> =
            Side::ALL.iter().map(|&s| (s, BTreeSet::new())).collect();
        for (v, &[x, y]) in self.vertices.iter().enumerate() {
            for side in on_sides(x, y) {
                sides.get_mut(&side).unwrap().insert(v);
            }
        }
        sides
    }
}

/// The sides of the unit square a point lies on (exact comparison; mesh and
/// node coordinates are binary-exact).
pub(crate) fn on_sides(x: f64, y: f64) -> impl Iterator<Item = Side> {
    [
        (x == 0.0, Side::Left),
        (x == 1.0, Side::Right),
        (y == 0.0, Side::Bottom),
        (y == 1.0, Side::Top),
    ]
    .into_iter()
    .filter_map(|(on, s)| on.then_some(s))
}

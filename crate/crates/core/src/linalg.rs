//! Sparse symmetric matrices and SPD solves for the least-squares normal
//! equations.

use std::fmt::Write as _;
use std::path::Path;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseRowMatRef, SymbolicSparseRowMatRef};
use faer::{Mat, Side};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative residual every solve must reach.
pub const RESIDUAL_TOLERANCE: f64 = 1e-12;

/// Iterative-refinement sweeps applied after a direct solve.
const MAX_REFINEMENT: usize = 4;

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Square `n x n` matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::Bounds { row: i, col: j, n });
            }
            rows[i].push((j, v));
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for mut row in rows {
            // stable sort keeps duplicate summation in input order
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                if col_indices.len() > *row_offsets.last().unwrap()
                    && *col_indices.last().unwrap() == j
                {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(CsrMatrix {
            nrows: n,
            ncols: n,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Zero matrix with the given sparsity; each row must be sorted and unique.
    pub fn from_pattern(ncols: usize, rows: &[Vec<usize>]) -> Self {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::with_capacity(rows.iter().map(Vec::len).sum());
        for row in rows {
            debug_assert!(row.windows(2).all(|w| w[0] < w[1]));
            debug_assert!(row.iter().all(|&j| j < ncols));
            col_indices.extend_from_slice(row);
            row_offsets.push(col_indices.len());
        }
        let nnz = col_indices.len();
        CsrMatrix {
            nrows: rows.len(),
            ncols,
            row_offsets,
            col_indices,
            values: vec![0.0; nnz],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        self.col_indices[lo..hi]
            .binary_search(&j)
            .ok()
            .map(|k| lo + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to a structurally present entry.
    ///
    /// # Panics
    /// If `(i, j)` is outside the sparsity pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) is not in the sparsity pattern"));
        self.values[k] += v;
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `b - A x` with each row accumulated in compensated arithmetic.
    pub fn residual(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(b.len(), self.nrows);
        (0..self.nrows)
            .map(|i| {
                let mut acc = Compensated::new(b[i]);
                for (j, v) in self.row(i) {
                    acc.add_product(-v, x[j]);
                }
                acc.value()
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |a_ij - a_ji| / max |a_ij|` (zero for the zero matrix).
    pub fn symmetry_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Symmetric elimination of homogeneous constraints: constrained rows and
    /// columns are zeroed and their diagonal set to one.
    pub fn eliminate(&mut self, constrained: &[bool]) {
        assert_eq!(constrained.len(), self.nrows);
        for i in 0..self.nrows {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let j = self.col_indices[k];
                if constrained[i] || constrained[j] {
                    self.values[k] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                d[(i, j)] += v;
            }
        }
        d
    }

    /// MatrixMarket coordinate dump (1-based indices, general storage).
    pub fn write_matrix_market(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut s = String::new();
        s.push_str("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                let _ = writeln!(s, "{} {} {:.17e}", i + 1, j + 1, v);
            }
        }
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    /// `||Ax - b|| / ||b||`, or `||Ax||` when `b = 0`.
    pub relative_residual: f64,
    pub method: SolveMethod,
    /// Krylov iterations; zero for direct solves.
    pub iterations: usize,
    /// Iterative-refinement sweeps applied on top of the factorization.
    pub refinement_steps: usize,
}

/// Sparse Cholesky factorization `A = L L^T` (fill-reducing ordering inside).
pub struct Cholesky {
    llt: Llt<usize, f64>,
    n: usize,
}

impl std::fmt::Debug for Cholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cholesky")
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

impl Cholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Solver(format!(
                "matrix is {}x{}, not square",
                a.nrows, a.ncols
            )));
        }
        let sym = SymbolicSparseRowMatRef::new_checked(
            a.nrows,
            a.ncols,
            &a.row_offsets,
            None,
            &a.col_indices,
        );
        let mat = SparseRowMatRef::new(sym, &a.values);
        let llt = mat
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Solver(format!("Cholesky factorization failed: {e}")))?;
        Ok(Cholesky { llt, n: a.nrows })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.llt.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Running sum carrying its rounding error separately (two-sum and fma
/// two-product), accurate to about twice the working precision.
pub(crate) struct Compensated {
    sum: f64,
    err: f64,
}

impl Compensated {
    pub(crate) fn new(start: f64) -> Self {
        Compensated {
            sum: start,
            err: 0.0,
        }
    }

    pub(crate) fn add(&mut self, v: f64) {
        let s = self.sum + v;
        let z = s - self.sum;
        self.err += (self.sum - (s - z)) + (v - z);
        self.sum = s;
    }

    pub(crate) fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        self.err += a.mul_add(b, -p);
        self.add(p);
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.err
    }
}

pub(crate) fn compensated_dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = Compensated::new(0.0);
    for (a, b) in x.iter().zip(y) {
        acc.add_product(*a, *b);
    }
    acc.value()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Direct solve followed by iterative refinement until the residual contract
/// holds. `residual(b, x)` must return `b - A x`.
pub(crate) fn refine(
    residual: impl Fn(&[f64], &[f64]) -> Vec<f64>,
    solve: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
) -> Result<(Vec<f64>, SolveReport)> {
    if let Some(i) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "right-hand side entry {i} is not finite"
        )));
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; b.len()],
            SolveReport {
                relative_residual: 0.0,
                method: SolveMethod::Direct,
                iterations: 0,
                refinement_steps: 0,
            },
        ));
    }
    let mut x = solve(b);
    let mut steps = 0;
    let mut rel;
    let mut previous = f64::INFINITY;
    loop {
        let r = residual(b, &x);
        rel = norm2(&r) / bnorm;
        if !rel.is_finite() {
            return Err(Error::Solver("solution is not finite".into()));
        }
        // Stop once refinement no longer pays: the residual then sits at the
        // rounding floor of the stored solution.
        if rel <= RESIDUAL_TOLERANCE * 1e-2 || steps == MAX_REFINEMENT || rel > 0.5 * previous {
            break;
        }
        previous = rel;
        let dx = solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        steps += 1;
    }
    if rel > RESIDUAL_TOLERANCE {
        return Err(Error::Convergence {
            residual: rel,
            tolerance: RESIDUAL_TOLERANCE,
        });
    }
    Ok((
        x,
        SolveReport {
            relative_residual: rel,
            method: SolveMethod::Direct,
            iterations: 0,
            refinement_steps: steps,
        },
    ))
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
    if b.len() != a.nrows {
        return Err(Error::Domain(format!(
            "right-hand side has length {} for a {}-row matrix",
            b.len(),
            a.nrows
        )));
    }
    let defect = a.symmetry_defect();
    if defect > 1e-12 {
        return Err(Error::Solver(format!(
            "matrix is not symmetric (defect {defect:e})"
        )));
    }
    let chol = Cholesky::factor(a)?;
    refine(|b, x| a.residual(b, x), |r| chol.solve(r), b)
}

/// SPD operator `A = B + gamma w w^T` where `B` is positive semidefinite with
/// a one-dimensional null space spanned by `null`, and `w^T null != 0`.
///
/// The dense rank-one term is never formed. Instead `B` is factored with one
/// null-space coordinate pinned and the rank-one part is resolved exactly:
/// since `null^T B = 0`, any solution has `w^T x = null^T b / (gamma w^T null)`
/// and `B x = b - w (null^T b) / (w^T null)`.
pub struct RankOneAugmented {
    base: CsrMatrix,
    weights: Vec<f64>,
    null: Vec<f64>,
    gamma: f64,
    pin: usize,
    pinned: Cholesky,
}

impl std::fmt::Debug for RankOneAugmented {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RankOneAugmented")
            .field("n", &self.base.nrows)
            .field("gamma", &self.gamma)
            .field("pin", &self.pin)
            .finish_non_exhaustive()
    }
}

impl RankOneAugmented {
    pub fn new(base: CsrMatrix, weights: Vec<f64>, null: Vec<f64>, gamma: f64) -> Result<Self> {
        let n = base.nrows;
        if weights.len() != n || null.len() != n {
            return Err(Error::Domain(
                "rank-one vectors do not match the matrix size".into(),
            ));
        }
        if !(gamma > 0.0) {
            return Err(Error::Domain(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if dot(&weights, &null).abs() == 0.0 {
            return Err(Error::Solver(
                "weight vector is orthogonal to the null space".into(),
            ));
        }
        let defect = base.symmetry_defect();
        if defect > 1e-12 {
            return Err(Error::Solver(format!(
                "matrix is not symmetric (defect {defect:e})"
            )));
        }
        // pin the last coordinate where the null vector is largest
        let pin = (0..n)
            .rev()
            .max_by(|&a, &b| null[a].abs().total_cmp(&null[b].abs()))
            .unwrap();
        let mut mask = vec![false; n];
        mask[pin] = true;
        let mut pinned = base.clone();
        pinned.eliminate(&mask);
        let pinned = Cholesky::factor(&pinned)?;
        Ok(RankOneAugmented {
            base,
            weights,
            null,
            gamma,
            pin,
            pinned,
        })
    }

    pub fn base(&self) -> &CsrMatrix {
        &self.base
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.base.matvec(x);
        let s = self.gamma * dot(&self.weights, x);
        for (yi, wi) in y.iter_mut().zip(&self.weights) {
            *yi += s * wi;
        }
        y
    }

    /// `b - A x`, accumulated as in [`CsrMatrix::residual`].
    pub fn residual(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        let mut r = self.base.residual(b, x);
        let s = self.gamma * compensated_dot(&self.weights, x);
        for (ri, wi) in r.iter_mut().zip(&self.weights) {
            *ri -= s * wi;
        }
        r
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = self.base.to_dense();
        let w = nalgebra::DVector::from_column_slice(&self.weights);
        d += self.gamma * &w * w.transpose();
        d
    }

    fn solve_once(&self, b: &[f64]) -> Vec<f64> {
        let zw = dot(&self.null, &self.weights);
        let zb = dot(&self.null, b);
        let mut rhs: Vec<f64> = b
            .iter()
            .zip(&self.weights)
            .map(|(bi, wi)| bi - wi * zb / zw)
            .collect();
        rhs[self.pin] = 0.0;
        let mut x = self.pinned.solve(&rhs);
        let target = zb / (self.gamma * zw);
        let alpha = (target - dot(&self.weights, &x)) / zw;
        for (xi, zi) in x.iter_mut().zip(&self.null) {
            *xi += alpha * zi;
        }
        x
    }

    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        if b.len() != self.base.nrows {
            return Err(Error::Domain("right-hand side has the wrong length".into()));
        }
        refine(|b, x| self.residual(b, x), |r| self.solve_once(r), b)
    }
}

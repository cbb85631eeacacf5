//! Finite-dimensional surrogates for the abstract space-time FOSLS setting.
//!
//! A model is a coordinate space `R^N` with inner product `<a, b> = a^T M b`,
//! an invertible operator `L`, and a discrete space spanned by the columns of
//! `P`. The first `k` coordinates play the role of the trace at `t = 0`, and
//! `P0` spans the discrete functions whose trace vanishes.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Models whose operator condition number exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e6;

const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct AbstractModel {
    inner: DMatrix<f64>,
    operator: DMatrix<f64>,
    basis: DMatrix<f64>,
    trace_dim: usize,
    homogeneous: DMatrix<f64>,
    condition: f64,
}

fn condition_number(a: &DMatrix<f64>) -> f64 {
    let s = a.singular_values();
    let max = s.max();
    let min = s.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn column_rank(a: &DMatrix<f64>) -> usize {
    let s = a.singular_values();
    let max = s.max();
    s.iter().filter(|&&v| v > RANK_TOLERANCE * max).count()
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn validate(
    inner: &DMatrix<f64>,
    operator: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    trace_dim: usize,
) -> Result<f64> {
    let n = inner.nrows();
    if inner.ncols() != n || operator.shape() != (n, n) || basis.nrows() != n {
        return Err(Error::Model("inconsistent model dimensions".into()));
    }
    if trace_dim == 0 || trace_dim >= n {
        return Err(Error::Model(format!(
            "trace dimension {trace_dim} out of range for N = {n}"
        )));
    }
    let asym = (inner - inner.transpose()).amax();
    if asym > 1e-12 * inner.amax() {
        return Err(Error::Model("inner product is not symmetric".into()));
    }
    if inner.clone().cholesky().is_none() {
        return Err(Error::Model(
            "inner product is not positive definite".into(),
        ));
    }
    let condition = condition_number(operator);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::Model(format!(
            "operator condition number {condition:.3e} too large"
        )));
    }
    if column_rank(basis) != basis.ncols() {
        return Err(Error::Model("discrete basis is rank deficient".into()));
    }
    Ok(condition)
}

impl AbstractModel {
    /// Builds a model from the inner product `M`, operator `L`, discrete
    /// basis `P` and trace dimension `k`. The zero-trace basis `P0` is
    /// computed from `P` as a basis of `{ P c : (P c)[..k] = 0 }`.
    pub fn new(
        inner: DMatrix<f64>,
        operator: DMatrix<f64>,
        basis: DMatrix<f64>,
        trace_dim: usize,
    ) -> Result<Self> {
        let condition = validate(&inner, &operator, &basis, trace_dim)?;
        let n = inner.nrows();
        // Null space of the trace block of P gives the zero-trace subspace.
        let trace = basis.rows(0, trace_dim).into_owned();
        let eig = (trace.transpose() * &trace).symmetric_eigen();
        let scale = eig.eigenvalues.amax().max(1.0);
        let null: Vec<usize> = (0..basis.ncols())
            .filter(|&i| eig.eigenvalues[i].abs() <= RANK_TOLERANCE * scale)
            .collect();
        let mut homogeneous = DMatrix::zeros(n, null.len());
        for (c, &i) in null.iter().enumerate() {
            let mut col = &basis * eig.eigenvectors.column(i);
            col.rows_mut(0, trace_dim).fill(0.0);
            homogeneous.set_column(c, &col);
        }
        Self::with_homogeneous(inner, operator, basis, trace_dim, homogeneous, condition)
    }

    /// Builds a model whose zero-trace basis is given explicitly; `P0` must
    /// have an exactly zero trace block and lie in the span of `P`.
    pub fn with_zero_trace_basis(
        inner: DMatrix<f64>,
        operator: DMatrix<f64>,
        basis: DMatrix<f64>,
        trace_dim: usize,
        homogeneous: DMatrix<f64>,
    ) -> Result<Self> {
        let condition = validate(&inner, &operator, &basis, trace_dim)?;
        Self::with_homogeneous(inner, operator, basis, trace_dim, homogeneous, condition)
    }

    fn with_homogeneous(
        inner: DMatrix<f64>,
        operator: DMatrix<f64>,
        basis: DMatrix<f64>,
        trace_dim: usize,
        homogeneous: DMatrix<f64>,
        condition: f64,
    ) -> Result<Self> {
        let n = inner.nrows();
        if homogeneous.nrows() != n || homogeneous.ncols() == 0 {
            return Err(Error::Model("zero-trace subspace is empty".into()));
        }
        if homogeneous.rows(0, trace_dim).iter().any(|&v| v != 0.0) {
            return Err(Error::Model(
                "zero-trace basis has a nonzero trace block".into(),
            ));
        }
        if column_rank(&homogeneous) != homogeneous.ncols() {
            return Err(Error::Model("zero-trace basis is rank deficient".into()));
        }
        // P0 must lie in span(P): least-squares residual of P c = P0.
        let coeffs = basis
            .clone()
            .svd(true, true)
            .solve(&homogeneous, 1e-14)
            .map_err(|e| Error::Model(e.to_string()))?;
        let defect = (&basis * coeffs - &homogeneous).amax();
        if defect > 1e-9 * homogeneous.amax().max(1.0) {
            return Err(Error::Model(
                "zero-trace basis is not contained in the discrete space".into(),
            ));
        }
        Ok(AbstractModel {
            inner,
            operator,
            basis,
            trace_dim,
            homogeneous,
            condition,
        })
    }

    /// Random model with a generic operator.
    pub fn random(seed: u64, dim: usize) -> Result<Self> {
        Self::sample(seed, dim, false)
    }

    /// Random model whose operator maps the zero-trace discrete subspace
    /// into itself, so that it restricts to that subspace.
    pub fn random_invariant(seed: u64, dim: usize) -> Result<Self> {
        Self::sample(seed, dim, true)
    }

    /// Random model with prescribed trace dimension `k` and zero-trace dimension `m`.
    pub fn random_with_shape(
        seed: u64,
        dim: usize,
        k: usize,
        m: usize,
        invariant: bool,
    ) -> Result<Self> {
        if k == 0 || m == 0 || k + m > dim {
            return Err(Error::Model(format!(
                "shape k = {k}, m = {m} impossible for N = {dim}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::sample_shape(&mut rng, seed, dim, k, m, invariant)
    }

    fn sample(seed: u64, dim: usize, invariant: bool) -> Result<Self> {
        if dim < 4 {
            return Err(Error::Model(format!(
                "model dimension must be at least 4, got {dim}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(1..=3.min(dim - 2));
        let m = rng.random_range(2..=dim - k);
        Self::sample_shape(&mut rng, seed, dim, k, m, invariant)
    }

    fn sample_shape(
        rng: &mut ChaCha8Rng,
        seed: u64,
        dim: usize,
        k: usize,
        m0: usize,
        invariant: bool,
    ) -> Result<Self> {
        for attempt in 0..64 {
            let a = gaussian(rng, dim, dim);
            let inner = a.transpose() * &a + DMatrix::identity(dim, dim) * dim as f64;

            let mut homogeneous = gaussian(rng, dim, m0);
            homogeneous.rows_mut(0, k).fill(0.0);
            let extension = gaussian(rng, dim, k);
            let mut basis = DMatrix::zeros(dim, k + m0);
            basis.columns_mut(0, k).copy_from(&extension);
            basis.columns_mut(k, m0).copy_from(&homogeneous);

            // A shift of 3 sqrt(N) dominates the spectral norm (about 2 sqrt(N))
            // of the Gaussian part, which keeps the operator well conditioned.
            let shift = DMatrix::identity(dim, dim) * 3.0 * (dim as f64).sqrt();
            let operator = if invariant {
                // L = Q B Q^T with orthogonal Q whose leading columns span
                // span(P0) and block upper-triangular B keeps span(P0) invariant.
                let mut x = gaussian(rng, dim, dim);
                x.columns_mut(0, m0).copy_from(&homogeneous);
                let q = x.qr().q();
                let mut b = gaussian(rng, dim, dim) + shift;
                b.view_mut((m0, 0), (dim - m0, m0)).fill(0.0);
                &q * b * q.transpose()
            } else {
                gaussian(rng, dim, dim) + shift
            };

            match Self::with_zero_trace_basis(inner, operator, basis, k, homogeneous) {
                Ok(model) => match model.galerkin_block().lu().try_inverse() {
                    Some(_) => return Ok(model),
                    None => log::warn!(
                        "seed {seed} attempt {attempt}: singular Galerkin block, resampling"
                    ),
                },
                Err(e) => log::warn!("seed {seed} attempt {attempt}: {e}, resampling"),
            }
        }
        Err(Error::Model(format!("no admissible model for seed {seed}")))
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn trace_dim(&self) -> usize {
        self.trace_dim
    }

    pub fn inner_product(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn zero_trace_basis(&self) -> &DMatrix<f64> {
        &self.homogeneous
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// `<a, b> = a^T M b`.
    pub fn dot(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.dot(&(&self.inner * b))
    }

    /// Upper triangular `R` with `M = R^T R`.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.inner
            .clone()
            .cholesky()
            .expect("inner product is SPD")
            .l()
            .transpose()
    }

    fn galerkin_block(&self) -> DMatrix<f64> {
        self.homogeneous.transpose() * &self.inner * &self.operator * &self.homogeneous
    }

    /// An element of the discrete space with the given trace.
    pub fn extension(&self, trace: &DVector<f64>, free: &DVector<f64>) -> Result<DVector<f64>> {
        let k = self.trace_dim;
        let m = self.basis.ncols();
        if trace.len() != k {
            return Err(Error::Model(format!(
                "trace has length {}, expected {k}",
                trace.len()
            )));
        }
        // Solve the trace block for k coefficients, fill the rest from `free`.
        let block = self.basis.rows(0, k).into_owned();
        let svd = block.clone().svd(true, true);
        let c = svd
            .solve(trace, 1e-14)
            .map_err(|e| Error::Model(e.to_string()))?;
        if (&block * &c - trace).amax() > 1e-10 * trace.amax().max(1.0) {
            return Err(Error::Model(
                "trace is not attainable in the discrete space".into(),
            ));
        }
        let mut w = &self.basis * c;
        if free.len() != self.homogeneous.ncols() {
            return Err(Error::Model(format!(
                "expected {} zero-trace coefficients, got {} (m = {m})",
                self.homogeneous.ncols(),
                free.len()
            )));
        }
        w += &self.homogeneous * free;
        Ok(w)
    }
}

/// `Q_h = P0 (P0^T M P0)^-1 P0^T M`.
pub fn l2_projection(model: &AbstractModel) -> Result<DMatrix<f64>> {
    let p0 = &model.homogeneous;
    let gram = p0.transpose() * &model.inner * p0;
    let inv = gram
        .cholesky()
        .ok_or_else(|| Error::Model("zero-trace Gram matrix is singular".into()))?
        .inverse();
    Ok(p0 * inv * p0.transpose() * &model.inner)
}

/// `Pi_h = P0 (P0^T M L P0)^-1 P0^T M L`.
pub fn galerkin_projection(model: &AbstractModel) -> Result<DMatrix<f64>> {
    let p0 = &model.homogeneous;
    let inv = model
        .galerkin_block()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Model("Galerkin block is singular".into()))?;
    Ok(p0 * inv * p0.transpose() * &model.inner * &model.operator)
}

/// Norm of `L_h Pi_h - Q_h L`, where `L_h = Q_h L` acts on the zero-trace space.
///
/// Both sides are formed in coordinates that are orthonormal for `M`
/// (`y = R x` with `M = R^T R`), where the operator norm is the spectral norm
/// and `Q_h` becomes an orthogonal projector.
pub fn verify_pq_identity(model: &AbstractModel) -> Result<f64> {
    let r = model.cholesky_factor();
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Model("inner product factor is singular".into()))?;
    let l = &r * &model.operator * &r_inv;
    let u = (&r * &model.homogeneous).qr().q();
    let q = &u * u.transpose();
    let g = u.transpose() * &l * &u;
    let pi = &u
        * g.lu()
            .solve(&(u.transpose() * &l))
            .ok_or_else(|| Error::Model("Galerkin block is singular".into()))?;
    let lhs = &q * &l * pi;
    let rhs = &q * &l;
    Ok((lhs - rhs).singular_values().max())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLawCheck {
    /// `<L u_h, u_h>`.
    pub lhs: f64,
    /// `<L u_h, w_h>`.
    pub rhs: f64,
    pub gap: f64,
}

impl EnergyLawCheck {
    /// `gap <= tol (1 + |lhs|)`.
    pub fn passes(&self, tol: f64) -> bool {
        self.gap <= tol * (1.0 + self.lhs.abs())
    }
}

/// FOSLS solution `u_h = w_h + P0 c` minimizing `||L u_h||` over `c`.
pub fn fosls_solution(model: &AbstractModel, w: &DVector<f64>) -> Result<DVector<f64>> {
    if w.len() != model.dim() {
        return Err(Error::Model(format!(
            "vector has length {}, expected {}",
            w.len(),
            model.dim()
        )));
    }
    let p0 = &model.homogeneous;
    // Least squares in the M-norm through R with M = R^T R, solved by QR
    // rather than the squared normal equations.
    let r = model.cholesky_factor();
    let a = &r * &model.operator * p0;
    let b = -(&r * &model.operator * w);
    let (q, rr) = a.qr().unpack();
    let c = rr
        .solve_upper_triangular(&(q.transpose() * b))
        .ok_or_else(|| Error::Model("singular normal equations".into()))?;
    Ok(w + p0 * c)
}

fn check_in_span(model: &AbstractModel, w: &DVector<f64>) -> Result<()> {
    let c = model
        .basis
        .clone()
        .svd(true, true)
        .solve(w, 1e-14)
        .map_err(|e| Error::Model(e.to_string()))?;
    if (&model.basis * c - w).amax() > 1e-9 * w.amax().max(1.0) {
        return Err(Error::Model(
            "extension does not lie in the discrete space".into(),
        ));
    }
    Ok(())
}

/// Compares `<L u_h, u_h>` with `<L u_h, w_h>` for the FOSLS solution built from `w_h`.
pub fn verify_energy_law_condition(
    model: &AbstractModel,
    w: &DVector<f64>,
) -> Result<EnergyLawCheck> {
    check_in_span(model, w)?;
    let u = fosls_solution(model, w)?;
    let lu = &model.operator * &u;
    let lhs = model.dot(&lu, &u);
    let rhs = model.dot(&lu, w);
    Ok(EnergyLawCheck {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

/// Solution of the undiscretized problem: `u = w + phi` with `phi` in the
/// full zero-trace space and `<L u, v> = 0` for every zero-trace `v`.
pub fn continuous_solution(model: &AbstractModel, w: &DVector<f64>) -> Result<DVector<f64>> {
    let n = model.dim();
    let k = model.trace_dim;
    let e0 = DMatrix::identity(n, n).columns(k, n - k).into_owned();
    let block = e0.transpose() * &model.inner * &model.operator * &e0;
    let rhs = -(e0.transpose() * &model.inner * (&model.operator * w));
    let a = block
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Model("continuous problem is singular".into()))?;
    Ok(w + e0 * a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfimumCheck {
    /// `|<L u, u> - <L u_h, u_h>|`.
    pub gap: f64,
    /// Smallest `|<L u, u> - <L u_h, w>|` over the sampled extensions.
    pub infimum: f64,
    /// Parameters `(s, t)` of the minimizing sample.
    pub argmin: (f64, f64),
}

/// Samples the extensions `w + s d1 + t d2` on the grid `params x params`,
/// keeping `u_h` fixed at the FOSLS solution built from `w`. The directions
/// must have zero trace and lie in the discrete space.
pub fn verify_infimum(
    model: &AbstractModel,
    w: &DVector<f64>,
    d1: &DVector<f64>,
    d2: &DVector<f64>,
    params: &[f64],
) -> Result<InfimumCheck> {
    check_in_span(model, w)?;
    let k = model.trace_dim;
    for d in [d1, d2] {
        check_in_span(model, d)?;
        if d.rows(0, k).amax() != 0.0 {
            return Err(Error::Model("sampling direction changes the trace".into()));
        }
    }
    if params.is_empty() {
        return Err(Error::Model("empty parameter grid".into()));
    }
    let u = continuous_solution(model, w)?;
    let uh = fosls_solution(model, w)?;
    let exact = model.dot(&(&model.operator * &u), &u);
    let luh = &model.operator * &uh;
    let gap = (exact - model.dot(&luh, &uh)).abs();
    let mut best = (f64::INFINITY, (0.0, 0.0));
    for &s in params {
        for &t in params {
            let cand = w + d1 * s + d2 * t;
            let v = (exact - model.dot(&luh, &cand)).abs();
            if v < best.0 {
                best = (v, (s, t));
            }
        }
    }
    Ok(InfimumCheck {
        gap,
        infimum: best.0,
        argmin: best.1,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbstractSummary {
    pub models: usize,
    pub worst_pq_residual: f64,
    /// Largest `gap / (1 + |lhs|)`.
    pub worst_energy_gap: f64,
    pub pq_failures: usize,
    pub energy_failures: usize,
}

/// Runs both checks on `seeds` models with dimension in `4..=dim_max`.
pub fn sweep(seeds: u64, dim_max: usize, invariant: bool, tol: f64) -> Result<AbstractSummary> {
    if dim_max < 4 {
        return Err(Error::Model(format!(
            "dim-max must be at least 4, got {dim_max}"
        )));
    }
    let mut summary = AbstractSummary {
        models: 0,
        worst_pq_residual: 0.0,
        worst_energy_gap: 0.0,
        pq_failures: 0,
        energy_failures: 0,
    };
    for seed in 0..seeds {
        let dim = 4 + (seed as usize) % (dim_max - 3);
        let model = if invariant {
            AbstractModel::random_invariant(seed, dim)?
        } else {
            AbstractModel::random(seed, dim)?
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let trace = DVector::from_fn(model.trace_dim(), |_, _| {
            rng.sample::<f64, _>(StandardNormal)
        });
        let free = DVector::from_fn(model.zero_trace_basis().ncols(), |_, _| {
            rng.sample::<f64, _>(StandardNormal)
        });
        let w = model.extension(&trace, &free)?;

        let pq = verify_pq_identity(&model)?;
        let energy = verify_energy_law_condition(&model, &w)?;
        let scaled = energy.gap / (1.0 + energy.lhs.abs());
        summary.models += 1;
        summary.worst_pq_residual = summary.worst_pq_residual.max(pq);
        summary.worst_energy_gap = summary.worst_energy_gap.max(scaled);
        if pq > tol {
            summary.pq_failures += 1;
        }
        if !energy.passes(tol) {
            summary.energy_failures += 1;
        }
    }
    Ok(summary)
}

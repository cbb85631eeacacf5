//! Least-squares discretization of the time-dependent Stokes equations in
//! velocity-gradient-pressure form, with `n . u = 0` on the boundary and a
//! zero-mean pressure, stepped with the same Crank-Nicolson half step as the
//! heat equation.
//!
//! With `V_ij = d_j u_i`, the eleven residual components are
//!
//! ```text
//! -div V + grad p + (2/tau) u = (2/tau) u_n   (2)
//!  div u                      = 0             (1)
//!  V - grad u                 = 0             (4)
//!  curl V                     = 0             (2, row-wise)
//!  grad tr V                  = 0             (2)
//! ```
//!
//! The pressure mean is enforced by adding `gamma (int p)^2` to the
//! functional, which removes the constant-pressure null space.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use crate::diagnostics::{energy_record, EnergyRecord};
use crate::error::{Error, Result};
use crate::fem::{FeFunction, FeSpace, QuadratureTable};
use crate::linalg::{dot, CsrMatrix, RankOneAugmented, SolveReport};
use crate::lsq::{block_mask, term, Deriv, FirstOrderOperator, Source};
use crate::mesh::Side;

pub const U1: usize = 0;
pub const U2: usize = 1;
pub const V11: usize = 2;
pub const V12: usize = 3;
pub const V21: usize = 4;
pub const V22: usize = 5;
pub const P: usize = 6;
pub const N_FIELDS: usize = 7;

/// Weight of the pressure-mean penalty.
pub const MEAN_PENALTY: f64 = 1.0;

pub fn stokes_operator(tau: f64) -> FirstOrderOperator {
    use Deriv::*;
    let r = 2.0 / tau;
    FirstOrderOperator::new(
        N_FIELDS,
        vec![
            // momentum
            vec![
                term(V11, Dx, -1.0),
                term(V12, Dy, -1.0),
                term(P, Dx, 1.0),
                term(U1, Value, r),
            ],
            vec![
                term(V21, Dx, -1.0),
                term(V22, Dy, -1.0),
                term(P, Dy, 1.0),
                term(U2, Value, r),
            ],
            // divergence
            vec![term(U1, Dx, 1.0), term(U2, Dy, 1.0)],
            // V - grad u
            vec![term(V11, Value, 1.0), term(U1, Dx, -1.0)],
            vec![term(V12, Value, 1.0), term(U1, Dy, -1.0)],
            vec![term(V21, Value, 1.0), term(U2, Dx, -1.0)],
            vec![term(V22, Value, 1.0), term(U2, Dy, -1.0)],
            // curl of each row of V
            vec![term(V12, Dx, 1.0), term(V11, Dy, -1.0)],
            vec![term(V22, Dx, 1.0), term(V21, Dy, -1.0)],
            // gradient of the trace
            vec![term(V11, Dx, 1.0), term(V22, Dx, 1.0)],
            vec![term(V11, Dy, 1.0), term(V22, Dy, 1.0)],
        ],
    )
}

/// Which velocity-gradient components are fixed to zero on the boundary.
/// Both choices also fix the normal velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientBoundary {
    /// `V12 = V21 = 0` on every side. This also fixes the normal derivative
    /// of the tangential velocity, which removes the boundary term from the
    /// energy identity.
    #[default]
    OffDiagonal,
    /// Only the tangential derivative of the normal velocity: `V12` on
    /// vertical sides, `V21` on horizontal ones.
    NormalTangential,
}

/// Constrained DOFs per field.
pub fn stokes_constraints(space: &FeSpace, bc: GradientBoundary) -> Vec<Vec<bool>> {
    let vertical = space.dof_mask(&[Side::Left, Side::Right]);
    let horizontal = space.dof_mask(&[Side::Bottom, Side::Top]);
    let free = vec![false; space.ndofs()];
    let (v12, v21) = match bc {
        GradientBoundary::OffDiagonal => {
            let all = space.dof_mask(&Side::ALL);
            (all.clone(), all)
        }
        GradientBoundary::NormalTangential => (vertical.clone(), horizontal.clone()),
    };
    vec![
        vertical,
        horizontal,
        free.clone(),
        v12,
        v21,
        free.clone(),
        free,
    ]
}

#[derive(Debug)]
pub struct StokesSystem {
    space: Arc<FeSpace>,
    tau: f64,
    operator: FirstOrderOperator,
    table: QuadratureTable,
    /// Least-squares matrix without the mean penalty, after elimination.
    matrix: CsrMatrix,
    /// `m_i = int phi_i` on the pressure block, zero elsewhere.
    mean_weights: Vec<f64>,
    constrained: Vec<bool>,
    boundary: GradientBoundary,
    solver: OnceLock<RankOneAugmented>,
}

pub fn assemble_stokes(space: Arc<FeSpace>, tau: f64) -> Result<StokesSystem> {
    assemble_stokes_with(space, tau, GradientBoundary::default())
}

pub fn assemble_stokes_with(
    space: Arc<FeSpace>,
    tau: f64,
    bc: GradientBoundary,
) -> Result<StokesSystem> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!(
            "time step must be positive, got {tau}"
        )));
    }
    let operator = stokes_operator(tau);
    let table = space.table(2 * space.order() as u32 + 1)?;
    let mut matrix = operator.assemble(&space, &table);
    let constrained = block_mask(space.ndofs(), &stokes_constraints(&space, bc));
    matrix.eliminate(&constrained);

    let n = space.ndofs();
    let mut mean_weights = vec![0.0; N_FIELDS * n];
    for e in 0..space.num_elements() {
        let det = space.geometry(e).det.abs();
        for q in 0..table.rule.len() {
            let w = table.rule.weights[q] * det;
            for (&d, &phi) in space.element_dofs(e).iter().zip(table.values(q)) {
                mean_weights[P * n + d] += w * phi;
            }
        }
    }
    Ok(StokesSystem {
        space,
        tau,
        operator,
        table,
        matrix,
        mean_weights,
        constrained,
        boundary: bc,
        solver: OnceLock::new(),
    })
}

impl StokesSystem {
    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Sparse part of the system; the full matrix adds `gamma m m^T`.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn mean_weight_vector(&self) -> &[f64] {
        &self.mean_weights
    }

    pub fn operator(&self) -> &FirstOrderOperator {
        &self.operator
    }

    pub fn constrained(&self) -> &[bool] {
        &self.constrained
    }

    pub fn boundary(&self) -> GradientBoundary {
        self.boundary
    }

    pub fn field_offsets(&self) -> [usize; N_FIELDS] {
        let n = self.space.ndofs();
        std::array::from_fn(|f| f * n)
    }

    /// Full system matrix including the mean penalty, as a dense matrix.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = self.matrix.to_dense();
        let m = nalgebra::DVector::from_column_slice(&self.mean_weights);
        d += MEAN_PENALTY * &m * m.transpose();
        d
    }

    /// `A x` for the full matrix.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.matrix.matvec(x);
        let s = MEAN_PENALTY * dot(&self.mean_weights, x);
        for (yi, mi) in y.iter_mut().zip(&self.mean_weights) {
            *yi += s * mi;
        }
        y
    }

    fn check_space(&self, f: &FeFunction) -> Result<()> {
        if f.space().same_as(&self.space) {
            Ok(())
        } else {
            Err(Error::Domain(
                "function does not belong to the system's space".into(),
            ))
        }
    }

    fn sources<'a>(&self, u_n: &'a [FeFunction; 2]) -> [Source<'a>; 2] {
        let scale = 2.0 / self.tau;
        [
            Source {
                component: 0,
                scale,
                coeffs: u_n[0].coeffs(),
            },
            Source {
                component: 1,
                scale,
                coeffs: u_n[1].coeffs(),
            },
        ]
    }

    /// Right-hand side; only the two momentum components carry data.
    pub fn rhs(&self, u_n: &[FeFunction; 2]) -> Result<Vec<f64>> {
        self.check_space(&u_n[0])?;
        self.check_space(&u_n[1])?;
        let mut b = self
            .operator
            .rhs(&self.space, &self.table, &self.sources(u_n));
        for (bi, &c) in b.iter_mut().zip(&self.constrained) {
            if c {
                *bi = 0.0;
            }
        }
        Ok(b)
    }

    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        let solver = match self.solver.get() {
            Some(s) => s,
            None => {
                let n = self.space.ndofs();
                let mut null = vec![0.0; N_FIELDS * n];
                null[P * n..].fill(1.0);
                let s = RankOneAugmented::new(
                    self.matrix.clone(),
                    self.mean_weights.clone(),
                    null,
                    MEAN_PENALTY,
                )?;
                self.solver.get_or_init(|| s)
            }
        };
        solver.solve(b)
    }

    /// Weak residual of the penalized functional at `x`, zero at constrained unknowns.
    pub fn galerkin_residual(&self, x: &[f64], u_n: &[FeFunction; 2]) -> Result<Vec<f64>> {
        self.check_space(&u_n[0])?;
        self.check_space(&u_n[1])?;
        let mut r = self
            .operator
            .weak_residual(&self.space, &self.table, x, &self.sources(u_n));
        let s = MEAN_PENALTY * dot(&self.mean_weights, x);
        for ((ri, mi), &c) in r.iter_mut().zip(&self.mean_weights).zip(&self.constrained) {
            *ri = if c { 0.0 } else { *ri + s * mi };
        }
        Ok(r)
    }

    /// Discrete mean `int p` of the pressure block of `x`.
    pub fn pressure_mean(&self, x: &[f64]) -> f64 {
        dot(&self.mean_weights, x)
    }

    pub fn split(&self, x: &[f64]) -> Result<[FeFunction; N_FIELDS]> {
        let n = self.space.ndofs();
        let mut out = Vec::with_capacity(N_FIELDS);
        for k in 0..N_FIELDS {
            out.push(FeFunction::new(
                self.space.clone(),
                x[k * n..(k + 1) * n].to_vec(),
            )?);
        }
        Ok(out.try_into().expect("N_FIELDS functions"))
    }
}

#[derive(Debug, Clone)]
pub struct StokesHalfStep {
    pub u: [FeFunction; 2],
    /// `V11, V12, V21, V22`.
    pub v: [FeFunction; 4],
    pub p: FeFunction,
    pub pressure_mean: f64,
    pub report: SolveReport,
}

#[derive(Debug, Clone)]
pub struct StokesState {
    pub n: usize,
    pub u: [FeFunction; 2],
    pub p: FeFunction,
    pub last_half: Option<StokesHalfStep>,
}

impl StokesState {
    /// Initial velocity with normal-component boundary DOFs set to zero, and zero pressure.
    pub fn initial(system: &StokesSystem, u0: [FeFunction; 2]) -> Result<Self> {
        system.check_space(&u0[0])?;
        system.check_space(&u0[1])?;
        let masks = stokes_constraints(&system.space, system.boundary);
        let [a, b] = u0;
        let clean = |f: FeFunction, mask: &[bool]| {
            let mut c = f.into_coeffs();
            for (ci, &m) in c.iter_mut().zip(mask) {
                if m {
                    *ci = 0.0;
                }
            }
            FeFunction::new(system.space.clone(), c)
        };
        Ok(StokesState {
            n: 0,
            u: [clean(a, &masks[U1])?, clean(b, &masks[U2])?],
            p: FeFunction::zeros(system.space.clone()),
            last_half: None,
        })
    }
}

fn extrapolate(space: &Arc<FeSpace>, half: &FeFunction, old: &FeFunction) -> Result<FeFunction> {
    let c = half
        .coeffs()
        .iter()
        .zip(old.coeffs())
        .map(|(h, o)| 2.0 * h - o)
        .collect();
    FeFunction::new(space.clone(), c)
}

pub fn stokes_step(system: &StokesSystem, state: &StokesState) -> Result<StokesState> {
    let b = system.rhs(&state.u)?;
    let (x, report) = system.solve(&b)?;
    let pressure_mean = system.pressure_mean(&x);
    let [u1, u2, v11, v12, v21, v22, p] = system.split(&x)?;
    let sp = &system.space;
    let u = [
        extrapolate(sp, &u1, &state.u[0])?,
        extrapolate(sp, &u2, &state.u[1])?,
    ];
    let p_next = extrapolate(sp, &p, &state.p)?;
    Ok(StokesState {
        n: state.n + 1,
        u,
        p: p_next,
        last_half: Some(StokesHalfStep {
            u: [u1, u2],
            v: [v11, v12, v21, v22],
            p,
            pressure_mean,
            report,
        }),
    })
}

pub fn stokes_energy(
    system: &StokesSystem,
    prev: &StokesState,
    next: &StokesState,
) -> Result<EnergyRecord> {
    let half = next
        .last_half
        .as_ref()
        .ok_or_else(|| Error::Domain("state carries no half-step solution".into()))?;
    let v: Vec<&FeFunction> = half.v.iter().collect();
    energy_record(
        prev.n,
        system.tau,
        &[&prev.u[0], &prev.u[1]],
        &[&next.u[0], &next.u[1]],
        &v,
    )
}

/// `(sin(pi x) cos(pi y), -cos(pi x) sin(pi y))`.
pub fn standard_initial(x: f64, y: f64) -> [f64; 2] {
    [
        (PI * x).sin() * (PI * y).cos(),
        -(PI * x).cos() * (PI * y).sin(),
    ]
}

/// Exact velocity for [`standard_initial`]; the exact pressure is zero.
pub fn standard_exact(x: f64, y: f64, t: f64) -> [f64; 2] {
    let d = (-2.0 * PI * PI * t).exp();
    standard_initial(x, y).map(|v| v * d)
}

pub fn run_stokes(
    level: u32,
    order: usize,
    tau: f64,
    steps: usize,
    u0: impl Fn(f64, f64) -> [f64; 2],
) -> Result<Vec<EnergyRecord>> {
    run_stokes_with(
        level,
        order,
        tau,
        steps,
        GradientBoundary::default(),
        u0,
        None::<fn(f64, f64, f64) -> [f64; 2]>,
    )
}

/// As [`run_stokes`], also recording the velocity L2 error at `t_{n+1}`.
pub fn run_stokes_with(
    level: u32,
    order: usize,
    tau: f64,
    steps: usize,
    bc: GradientBoundary,
    u0: impl Fn(f64, f64) -> [f64; 2],
    exact: Option<impl Fn(f64, f64, f64) -> [f64; 2]>,
) -> Result<Vec<EnergyRecord>> {
    if steps == 0 {
        return Err(Error::Domain("at least one time step is required".into()));
    }
    let space = Arc::new(FeSpace::uniform(level, order)?);
    let system = assemble_stokes_with(space.clone(), tau, bc)?;
    let init = [
        FeFunction::interpolate(space.clone(), |x, y| u0(x, y)[0])?,
        FeFunction::interpolate(space, |x, y| u0(x, y)[1])?,
    ];
    let mut state = StokesState::initial(&system, init)?;
    let mut records = Vec::with_capacity(steps);
    for _ in 0..steps {
        let next = stokes_step(&system, &state)?;
        let mut rec = stokes_energy(&system, &state, &next)?;
        if let Some(f) = &exact {
            let t = next.n as f64 * tau;
            let e0 = next.u[0].l2_error(|x, y| f(x, y, t)[0]);
            let e1 = next.u[1].l2_error(|x, y| f(x, y, t)[1]);
            rec.l2_error_u = Some(e0.hypot(e1));
        }
        records.push(rec);
        state = next;
    }
    Ok(records)
}

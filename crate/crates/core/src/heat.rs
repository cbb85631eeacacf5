//! Least-squares discretization of the heat equation `u_t = Δu` on the unit
//! square with `u = 0` on the boundary, stepped with Crank-Nicolson in
//! half-step form:
//!
//! ```text
//! (u_{n+1/2} - u_n) / (tau / 2) = Δu_{n+1/2},   u_{n+1} = 2 u_{n+1/2} - u_n.
//! ```
//!
//! Each half step minimizes `||L (u, V) - F||^2` over the finite-element space
//! for the first-order system with `V = ∇u`:
//!
//! ```text
//! -div V + (2/tau) u = (2/tau) u_n
//!  V - grad u        = 0
//!  curl V            = 0
//! ```

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use crate::diagnostics::{energy_record, EnergyRecord};
use crate::error::{Error, Result};
use crate::fem::{FeFunction, FeSpace, QuadratureTable};
use crate::linalg::{refine, Cholesky, CsrMatrix, SolveReport};
use crate::lsq::{block_mask, term, Deriv, FirstOrderOperator, Source};
use crate::mesh::Side;

/// Field indices in the global unknown vector.
pub const U: usize = 0;
pub const V1: usize = 1;
pub const V2: usize = 2;
pub const N_FIELDS: usize = 3;

/// The four scalar residual components of the first-order system.
pub fn heat_operator(tau: f64) -> FirstOrderOperator {
    use Deriv::*;
    FirstOrderOperator::new(
        N_FIELDS,
        vec![
            vec![
                term(V1, Dx, -1.0),
                term(V2, Dy, -1.0),
                term(U, Value, 2.0 / tau),
            ],
            vec![term(V1, Value, 1.0), term(U, Dx, -1.0)],
            vec![term(V2, Value, 1.0), term(U, Dy, -1.0)],
            vec![term(V2, Dx, 1.0), term(V1, Dy, -1.0)],
        ],
    )
}

/// Constrained DOFs per field: `u` on the whole boundary and the tangential
/// component of `V` on each side (`V1` on horizontal sides, `V2` on vertical).
pub fn heat_constraints(space: &FeSpace) -> [Vec<bool>; N_FIELDS] {
    [
        space.dof_mask(&Side::ALL),
        space.dof_mask(&[Side::Bottom, Side::Top]),
        space.dof_mask(&[Side::Left, Side::Right]),
    ]
}

#[derive(Debug)]
pub struct HeatSystem {
    space: Arc<FeSpace>,
    tau: f64,
    operator: FirstOrderOperator,
    table: QuadratureTable,
    matrix: CsrMatrix,
    constrained: Vec<bool>,
    factor: OnceLock<Cholesky>,
}

/// Assembles the normal equations for time step `tau`, with boundary
/// conditions applied by symmetric elimination.
pub fn assemble_heat(space: Arc<FeSpace>, tau: f64) -> Result<HeatSystem> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!(
            "time step must be positive, got {tau}"
        )));
    }
    let operator = heat_operator(tau);
    let table = space.table(2 * space.order() as u32 + 1)?;
    let mut matrix = operator.assemble(&space, &table);
    let constrained = block_mask(space.ndofs(), &heat_constraints(&space));
    matrix.eliminate(&constrained);
    Ok(HeatSystem {
        space,
        tau,
        operator,
        table,
        matrix,
        constrained,
        factor: OnceLock::new(),
    })
}

impl HeatSystem {
    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn operator(&self) -> &FirstOrderOperator {
        &self.operator
    }

    /// Global mask of eliminated unknowns.
    pub fn constrained(&self) -> &[bool] {
        &self.constrained
    }

    /// Start index of each field block.
    pub fn field_offsets(&self) -> [usize; N_FIELDS] {
        let n = self.space.ndofs();
        [0, n, 2 * n]
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

    /// Right-hand side `<((2/tau) u_n, 0, 0, 0), L phi_i>`, zero at constrained unknowns.
    pub fn rhs(&self, u_n: &FeFunction) -> Result<Vec<f64>> {
        self.check_space(u_n)?;
        let src = [Source {
            component: 0,
            scale: 2.0 / self.tau,
            coeffs: u_n.coeffs(),
        }];
        let mut b = self.operator.rhs(&self.space, &self.table, &src);
        for (bi, &c) in b.iter_mut().zip(&self.constrained) {
            if c {
                *bi = 0.0;
            }
        }
        Ok(b)
    }

    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        if b.len() != self.matrix.nrows() {
            return Err(Error::Domain("right-hand side has the wrong length".into()));
        }
        let chol = match self.factor.get() {
            Some(c) => c,
            None => {
                let c = Cholesky::factor(&self.matrix)?;
                self.factor.get_or_init(|| c)
            }
        };
        refine(|b, x| self.matrix.residual(b, x), |r| chol.solve(r), b)
    }

    /// `<L x - F, L phi_i>` over unconstrained unknowns (constrained entries are zero),
    /// integrated independently of the assembled matrix.
    pub fn galerkin_residual(&self, x: &[f64], u_n: &FeFunction) -> Result<Vec<f64>> {
        self.check_space(u_n)?;
        let src = [Source {
            component: 0,
            scale: 2.0 / self.tau,
            coeffs: u_n.coeffs(),
        }];
        let mut r = self
            .operator
            .weak_residual(&self.space, &self.table, x, &src);
        for (ri, &c) in r.iter_mut().zip(&self.constrained) {
            if c {
                *ri = 0.0;
            }
        }
        Ok(r)
    }

    /// Splits a solution vector into `(u, V1, V2)`.
    pub fn split(&self, x: &[f64]) -> Result<[FeFunction; N_FIELDS]> {
        let n = self.space.ndofs();
        let f = |k: usize| FeFunction::new(self.space.clone(), x[k * n..(k + 1) * n].to_vec());
        Ok([f(U)?, f(V1)?, f(V2)?])
    }
}

/// Solution of one half step.
#[derive(Debug, Clone)]
pub struct HeatHalfStep {
    pub u: FeFunction,
    pub v: [FeFunction; 2],
    pub report: SolveReport,
}

#[derive(Debug, Clone)]
pub struct HeatState {
    pub n: usize,
    pub u: FeFunction,
    pub last_half: Option<HeatHalfStep>,
}

impl HeatState {
    /// Initial state from `u0`; boundary DOFs are set to exactly zero.
    pub fn initial(system: &HeatSystem, u0: FeFunction) -> Result<Self> {
        system.check_space(&u0)?;
        let mask = system.space.dof_mask(&Side::ALL);
        let mut c = u0.into_coeffs();
        for (ci, &m) in c.iter_mut().zip(&mask) {
            if m {
                *ci = 0.0;
            }
        }
        Ok(HeatState {
            n: 0,
            u: FeFunction::new(system.space.clone(), c)?,
            last_half: None,
        })
    }
}

/// Advances one Crank-Nicolson step.
pub fn heat_step(system: &HeatSystem, state: &HeatState) -> Result<HeatState> {
    let b = system.rhs(&state.u)?;
    let (x, report) = system.solve(&b)?;
    let [u_half, v1, v2] = system.split(&x)?;
    let next: Vec<f64> = u_half
        .coeffs()
        .iter()
        .zip(state.u.coeffs())
        .map(|(h, old)| 2.0 * h - old)
        .collect();
    Ok(HeatState {
        n: state.n + 1,
        u: FeFunction::new(system.space.clone(), next)?,
        last_half: Some(HeatHalfStep {
            u: u_half,
            v: [v1, v2],
            report,
        }),
    })
}

/// Energy record for the step that produced `next` from `prev`.
pub fn heat_energy(
    system: &HeatSystem,
    prev: &HeatState,
    next: &HeatState,
) -> Result<EnergyRecord> {
    let half = next
        .last_half
        .as_ref()
        .ok_or_else(|| Error::Domain("state carries no half-step solution".into()))?;
    energy_record(
        prev.n,
        system.tau,
        &[&prev.u],
        &[&next.u],
        &[&half.v[0], &half.v[1]],
    )
}

/// `sin(pi x) sin(pi y)`.
pub fn standard_initial(x: f64, y: f64) -> f64 {
    (PI * x).sin() * (PI * y).sin()
}

/// `sin(pi x) sin(pi y) exp(-2 pi^2 t)`, the solution for [`standard_initial`].
pub fn standard_exact(x: f64, y: f64, t: f64) -> f64 {
    standard_initial(x, y) * (-2.0 * PI * PI * t).exp()
}

pub fn standard_exact_gradient(x: f64, y: f64, t: f64) -> [f64; 2] {
    let d = (-2.0 * PI * PI * t).exp();
    [
        PI * (PI * x).cos() * (PI * y).sin() * d,
        PI * (PI * x).sin() * (PI * y).cos() * d,
    ]
}

/// Runs `steps` steps from the interpolant of `u0`, one record per step.
pub fn run_heat(
    level: u32,
    order: usize,
    tau: f64,
    steps: usize,
    u0: impl Fn(f64, f64) -> f64,
) -> Result<Vec<EnergyRecord>> {
    run_heat_with(
        level,
        order,
        tau,
        steps,
        u0,
        None::<fn(f64, f64, f64) -> f64>,
    )
}

/// As [`run_heat`], also recording `||u_{n+1} - exact(t_{n+1})||`.
pub fn run_heat_with(
    level: u32,
    order: usize,
    tau: f64,
    steps: usize,
    u0: impl Fn(f64, f64) -> f64,
    exact: Option<impl Fn(f64, f64, f64) -> f64>,
) -> Result<Vec<EnergyRecord>> {
    if steps == 0 {
        return Err(Error::Domain("at least one time step is required".into()));
    }
    let space = Arc::new(FeSpace::uniform(level, order)?);
    let system = assemble_heat(space.clone(), tau)?;
    let mut state = HeatState::initial(&system, FeFunction::interpolate(space, u0)?)?;
    let mut records = Vec::with_capacity(steps);
    for _ in 0..steps {
        let next = heat_step(&system, &state)?;
        let mut rec = heat_energy(&system, &state, &next)?;
        if let Some(f) = &exact {
            let t = (next.n as f64) * tau;
            rec.l2_error_u = Some(next.u.l2_error(|x, y| f(x, y, t)));
        }
        records.push(rec);
        state = next;
    }
    Ok(records)
}

//! Discrete energy-law residuals and solution errors.

use crate::error::{Error, Result};
use crate::fem::FeFunction;

/// Energy-law bookkeeping for one time step `n -> n + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub n: usize,
    /// `n * tau`.
    pub time: f64,
    /// `(||u_{n+1}||^2 - ||u_n||^2) / (2 tau) + ||V_{n+1/2}||^2`.
    pub energy_residual: f64,
    pub abs_residual: f64,
    pub norm_u_n: f64,
    pub norm_u_np1: f64,
    pub norm_v_half: f64,
    /// `||u_{n+1} - u(t_{n+1})||` when an exact solution is known.
    pub l2_error_u: Option<f64>,
}

fn squared_norm(fields: &[&FeFunction]) -> f64 {
    fields.iter().map(|f| f.l2_norm_squared()).sum()
}

fn check_spaces(groups: &[&[&FeFunction]]) -> Result<()> {
    let mut all = groups.iter().flat_map(|g| g.iter());
    if let Some(first) = all.next() {
        for f in all {
            if !f.space().same_as(first.space()) {
                return Err(Error::Domain(
                    "energy residual over mismatched spaces".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Signed discrete energy-law residual. Vector and tensor fields are passed
/// as their scalar components; their norms are those of the concatenation.
pub fn energy_residual(
    u_n: &[&FeFunction],
    u_np1: &[&FeFunction],
    v_half: &[&FeFunction],
    tau: f64,
) -> Result<f64> {
    Ok(energy_record(0, tau, u_n, u_np1, v_half)?.energy_residual)
}

pub fn energy_record(
    n: usize,
    tau: f64,
    u_n: &[&FeFunction],
    u_np1: &[&FeFunction],
    v_half: &[&FeFunction],
) -> Result<EnergyRecord> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!(
            "time step must be positive, got {tau}"
        )));
    }
    if u_n.len() != u_np1.len() {
        return Err(Error::Domain(
            "u_n and u_{n+1} have different component counts".into(),
        ));
    }
    check_spaces(&[u_n, u_np1, v_half])?;
    let a = squared_norm(u_n);
    let b = squared_norm(u_np1);
    let v = squared_norm(v_half);
    let e = (b - a) / (2.0 * tau) + v;
    Ok(EnergyRecord {
        n,
        time: n as f64 * tau,
        energy_residual: e,
        abs_residual: e.abs(),
        norm_u_n: a.sqrt(),
        norm_u_np1: b.sqrt(),
        norm_v_half: v.sqrt(),
        l2_error_u: None,
    })
}

/// `(L2, H1)` errors of a scalar field against an exact solution and its gradient.
pub fn solution_error(
    u: &FeFunction,
    exact: impl Fn(f64, f64) -> f64,
    grad: impl Fn(f64, f64) -> [f64; 2],
) -> (f64, f64) {
    (u.l2_error(&exact), u.h1_error(&exact, &grad))
}

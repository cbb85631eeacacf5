use std::sync::Arc;

use super::space::FeSpace;
use crate::error::{Error, Result};

/// Coefficient vector over an [`FeSpace`].
#[derive(Debug, Clone)]
pub struct FeFunction {
    space: Arc<FeSpace>,
    coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn new(space: Arc<FeSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.ndofs() {
            return Err(Error::Domain(format!(
                "coefficient vector has length {} but the space has {} DOFs",
                coeffs.len(),
                space.ndofs()
            )));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::Evaluation(format!("coefficient {i} is not finite")));
        }
        Ok(FeFunction { space, coeffs })
    }

    pub fn zeros(space: Arc<FeSpace>) -> Self {
        let n = space.ndofs();
        FeFunction {
            space,
            coeffs: vec![0.0; n],
        }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(space: Arc<FeSpace>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(space.ndofs());
        for &[x, y] in space.dof_coords() {
            let v = f(x, y);
            if !v.is_finite() {
                return Err(Error::Evaluation(format!("f({x}, {y}) = {v}")));
            }
            coeffs.push(v);
        }
        Ok(FeFunction { space, coeffs })
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_squared().sqrt()
    }

    /// `||g||^2`, integrated exactly (degree `2p`).
    pub fn l2_norm_squared(&self) -> f64 {
        let p = self.space.order() as u32;
        self.integrate(2 * p, |v, _, _| v * v)
    }

    pub fn h1_seminorm(&self) -> f64 {
        let p = self.space.order() as u32;
        self.integrate(2 * p, |_, g, _| g[0] * g[0] + g[1] * g[1])
            .sqrt()
    }

    /// `||g - f||` with a rule of degree `2p + 3`.
    pub fn l2_error(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let p = self.space.order() as u32;
        self.integrate(2 * p + 3, |v, _, x| (v - f(x[0], x[1])).powi(2))
            .sqrt()
    }

    /// Full `H^1` norm of `g - f`; `grad` is the gradient of `f`.
    pub fn h1_error(
        &self,
        f: impl Fn(f64, f64) -> f64,
        grad: impl Fn(f64, f64) -> [f64; 2],
    ) -> f64 {
        let p = self.space.order() as u32;
        self.integrate(2 * p + 3, |v, g, x| {
            let d = grad(x[0], x[1]);
            (v - f(x[0], x[1])).powi(2) + (g[0] - d[0]).powi(2) + (g[1] - d[1]).powi(2)
        })
        .sqrt()
    }

    /// Sums `integrand(value, gradient, point)` over all elements in order.
    fn integrate(&self, degree: u32, integrand: impl Fn(f64, [f64; 2], [f64; 2]) -> f64) -> f64 {
        let space = &*self.space;
        let table = space
            .table(degree)
            .expect("norm quadrature degree is within the tabulated range");
        let mut total = 0.0;
        for e in 0..space.num_elements() {
            let geo = space.geometry(e);
            let dofs = space.element_dofs(e);
            let mut elem = 0.0;
            for q in 0..table.rule.len() {
                let mut v = 0.0;
                let mut gr = [0.0; 2];
                for ((&d, &phi), dphi) in dofs.iter().zip(table.values(q)).zip(table.ref_grads(q)) {
                    let c = self.coeffs[d];
                    v += c * phi;
                    gr[0] += c * dphi[0];
                    gr[1] += c * dphi[1];
                }
                let x = geo.map(table.rule.points[q]);
                elem += table.rule.weights[q] * integrand(v, geo.physical_gradient(gr), x);
            }
            total += elem * geo.det.abs();
        }
        total
    }
}

//! Continuous Lagrange finite elements of order 1 to 3 on uniform meshes.

mod basis;
mod function;
mod quadrature;
mod space;

pub use basis::{eval_basis, LagrangeBasis, MAX_ORDER};
pub use function::FeFunction;
pub use quadrature::{gauss_legendre_unit, quadrature_rule, QuadratureRule, MAX_DEGREE};
pub use space::{ElementGeometry, FeSpace, QuadratureTable};

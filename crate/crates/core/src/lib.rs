//! First-order system least-squares (FOSLS) finite elements for the heat and
//! time-dependent Stokes equations, with diagnostics for how well the discrete
//! solutions satisfy the energy dissipation law
//! `d/dt ||u||^2 / 2 = -||grad u||^2`.

pub mod abstract_laws;
pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod heat;
pub mod linalg;
pub mod lsq;
pub mod mesh;
pub mod stokes;
pub mod study;

pub use error::{Error, Result};

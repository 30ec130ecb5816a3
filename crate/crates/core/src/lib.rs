//! Streamline-upwind stabilised dynamical low-rank time integration for random
//! advection-diffusion-reaction problems on the unit square.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`). The aliases at
//! the crate root fix the scalar to `f64`, which is what the runner uses.

// Index loops mirror the element formulas; negated comparisons are NaN-safe on purpose.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod diagnostics;
pub mod dlr;
pub mod error;
pub mod fem;
pub mod fom;
pub mod integrator;
pub mod linalg;
pub mod mesh;
pub mod operator;
pub mod runner;
pub mod scalar;
pub mod stochastic;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Mesh64 = mesh::Mesh<f64>;
pub type P1Space64 = fem::P1Space<f64>;
pub type SampleSpace64 = stochastic::SampleSpace<f64>;
pub type CoefficientModel64 = coefficients::CoefficientModel<f64>;
pub type DiscreteProblem64 = operator::DiscreteProblem<f64>;
pub type DlrState64 = dlr::DlrState<f64>;
pub type FomState64 = fom::FomState<f64>;
pub type CsrMatrix64 = linalg::CsrMatrix<f64>;

pub type Mesh32 = mesh::Mesh<f32>;
pub type SampleSpace32 = stochastic::SampleSpace<f32>;
pub type DlrState32 = dlr::DlrState<f32>;

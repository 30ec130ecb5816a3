//! Sparse storage and the direct solvers used by the time steppers.

mod banded;
mod csr;
mod lanczos;

pub use banded::{BandedCholesky, BandedLu};
pub use csr::CsrMatrix;
pub use lanczos::max_generalized_eigenvalue;

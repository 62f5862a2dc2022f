//! Banded kernels used by the solvers.

mod banded;

pub use banded::BandedCholesky;


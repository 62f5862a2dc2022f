//! Grids, staggered velocity fields, discrete operators and I/O.

mod field;
mod grid;
pub mod io;
pub mod ops;
mod projection;
mod trajectory;

pub use field::{ScalarField, VelocityField};
pub use grid::{GridSpec, Region, SmoothCutoff};
pub use ops::{divergence, gradient, scalar_laplacian, stream_velocity, vector_laplacian};
pub use projection::{project_div_free, solve_neumann_poisson};
pub use trajectory::{inner_space_time, SpaceWeight, Trajectory};

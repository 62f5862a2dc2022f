//! Time integration of the Stokes / Navier-Stokes systems and of the coupled
//! forward-backward optimality systems.

mod convection;
mod forcing;
mod manufactured;
mod solver;
mod step;

pub use convection::{adjoint_coupling, convection, ConvectionStencil};
pub use manufactured::ManufacturedStokes;
pub use forcing::{ControlGeometry, ForcingAssembly, SolverOptions};
pub use solver::{forcing_representer, AdjointSolution, CoupledData, CoupledSolution, FlowSolver};
pub use step::StokesStep;

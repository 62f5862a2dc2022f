//! The robust functional, its saddle point and saddle diagnostics.

mod functional;
mod params;
mod saddle;

pub use functional::{JrTerms, SaddleProblem};
pub use params::RobustParams;
pub use saddle::{estimate_gamma0, AscentOptions, Gamma0Bracket, OneSided, ProbeRecord, SaddleReport, SaddleResult};

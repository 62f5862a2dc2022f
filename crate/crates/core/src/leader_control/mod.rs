//! Leader control of minimal norm steering the coupled optimality system
//! towards rest, through a terminal penalty.

mod cg;
mod nonlinear;

pub use cg::{EpsilonRecord, LeaderProblem, LeaderResult, PenaltyConfig};
pub use nonlinear::{escalate_delta, v_norm, DeltaProbe, NonlinearConfig, NonlinearLeaderResult};

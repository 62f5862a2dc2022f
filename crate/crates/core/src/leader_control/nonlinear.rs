use serde::{Deserialize, Serialize};

use super::cg::{LeaderProblem, LeaderResult, PenaltyConfig};
use crate::error::{Error, Result};
use crate::grid_fields::ops::h1_seminorm_sq;
use crate::grid_fields::{Trajectory, VelocityField};
use crate::stokes_core::{CoupledData, CoupledSolution};

/// Outer fixed-point controls for the Navier-Stokes leader problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonlinearConfig {
    pub outer_tol: f64,
    pub outer_max: usize,
    /// Bound on the H1 seminorm of the initial state.
    pub delta: f64,
}

impl Default for NonlinearConfig {
    fn default() -> Self {
        NonlinearConfig {
            outer_tol: 1e-6,
            outer_max: 10,
            delta: 1e-2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NonlinearLeaderResult {
    pub leader: LeaderResult,
    /// Terminal state of the nonlinear coupled system under the final control.
    pub terminal_norm: f64,
    pub outer_iterations: usize,
    /// Relative control change per outer iteration.
    pub changes: Vec<f64>,
}

/// Outcome of an increasing sequence of initial-data sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaProbe {
    /// Largest size for which the outer loop converged.
    pub delta_star: Option<f64>,
    /// `(delta, converged, outer iterations)` for each attempt.
    pub attempts: Vec<(f64, bool, usize)>,
}

/// Discrete `H^1_0` seminorm, used as the size of initial data.
pub fn v_norm(y: &VelocityField) -> f64 {
    h1_seminorm_sq(y).max(0.0).sqrt()
}

impl<'a> LeaderProblem<'a> {
    fn nonlinear_state(&self, h: &Trajectory) -> Result<CoupledSolution> {
        let data = CoupledData {
            h: Some(h),
            y0: self.y0,
            yd: self.yd,
            f1: None,
            f2: None,
        };
        self.solver.solve_coupled_nonlinear(&data, &self.params, &self.opts, None)
    }

    /// Freezes the advection and adjoint-coupling terms at the current
    /// nonlinear state, solves the resulting linear leader problem and
    /// repeats until the control settles.
    pub fn solve_null_control_nonlinear(
        &self,
        cfg: &PenaltyConfig,
        outer: &NonlinearConfig,
    ) -> Result<NonlinearLeaderResult> {
        let size = v_norm(self.y0);
        if size > outer.delta {
            return Err(Error::Precondition(format!(
                "initial state has V-norm {size:.3e} above the small-data bound {:.3e}",
                outer.delta
            )));
        }
        let g = *self.solver.grid();
        let stencil = self.solver.stencil();
        let mut h = Trajectory::zeros(&g);
        let mut state = self.nonlinear_state(&h)?;
        let mut changes = Vec::new();
        for it in 1..=outer.outer_max {
            let f1 = Trajectory {
                grid: g,
                steps: state.y.steps.iter().map(|y| stencil.apply(y).scaled(-1.0)).collect(),
            };
            let f2 = Trajectory {
                grid: g,
                steps: state
                    .y
                    .steps
                    .iter()
                    .zip(&state.z_state.steps)
                    .map(|(y, z)| stencil.linearized_transpose(y, z).scaled(-1.0))
                    .collect(),
            };
            let frozen = LeaderProblem {
                f1: Some(&f1),
                f2: Some(&f2),
                ..*self
            };
            let leader = frozen.solve_null_control_cg(cfg)?;
            let dh = leader.h.sub(&h).norm();
            let hn = leader.h.norm();
            let change = if hn > 0.0 { dh / hn } else { dh };
            changes.push(change);
            h = leader.h.clone();
            state = self.nonlinear_state(&h)?;
            if change <= outer.outer_tol {
                return Ok(NonlinearLeaderResult {
                    terminal_norm: state.y.terminal().norm(),
                    leader,
                    outer_iterations: it,
                    changes,
                });
            }
        }
        Err(Error::OuterLoop {
            iterations: outer.outer_max,
            residual: changes.last().copied().unwrap_or(f64::NAN),
        })
    }
}

/// Runs the nonlinear leader problem for `y0 = delta * shape / |shape|_V`
/// over increasing `deltas`, stopping at the first failure.
pub fn escalate_delta(
    base: &LeaderProblem<'_>,
    shape: &VelocityField,
    deltas: &[f64],
    cfg: &PenaltyConfig,
    outer: &NonlinearConfig,
) -> Result<DeltaProbe> {
    let sn = v_norm(shape);
    if sn == 0.0 {
        return Err(Error::Precondition("escalation shape has zero V-norm".into()));
    }
    let mut attempts = Vec::new();
    let mut delta_star = None;
    for &d in deltas {
        let y0 = shape.scaled(d / sn);
        let p = LeaderProblem { y0: &y0, ..*base };
        let bound = NonlinearConfig {
            delta: d * (1.0 + 1e-12),
            ..*outer
        };
        match p.solve_null_control_nonlinear(cfg, &bound) {
            Ok(r) => {
                attempts.push((d, true, r.outer_iterations));
                delta_star = Some(d);
            }
            Err(e) if e.is_config() => return Err(e),
            Err(_) => {
                attempts.push((d, false, outer.outer_max));
                break;
            }
        }
    }
    Ok(DeltaProbe { delta_star, attempts })
}

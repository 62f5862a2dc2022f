use serde::{Deserialize, Serialize};

use super::params::CarlemanParams;
use super::weights::{ln_weight_product, Family, WeightSpec};
use super::LogSum;
use crate::error::{Error, Result};
use crate::grid_fields::ops::{h1_seminorm_sq, vector_laplacian};
use crate::grid_fields::{GridSpec, Trajectory, VelocityField};
use crate::robust_saddle::RobustParams;
use crate::stokes_core::{CoupledSolution, FlowSolver};

/// Natural logarithms of the addends of the weighted norm of a controlled
/// trajectory (`-inf` for a vanishing addend). The weights grow like
/// `exp(c / (T - t)^5)` near the horizon, so the addends themselves
/// overflow for any state that is not exactly at rest before `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ENormReport {
    pub ln_y_l2: f64,
    pub ln_z_l2: f64,
    pub ln_h_omega: f64,
    pub ln_y_h2: f64,
    pub ln_y_linf_v: f64,
    pub ln_z_h2: f64,
    pub ln_z_linf_v: f64,
    /// Defect of the discrete state equation with the coupling and leader terms removed.
    pub ln_state_defect: f64,
    /// Defect of the discrete adjoint equation with the tracking source removed.
    pub ln_adjoint_defect: f64,
    pub ln_total: f64,
}

impl ENormReport {
    pub fn components(&self) -> [(&'static str, f64); 9] {
        [
            ("y_l2", self.ln_y_l2),
            ("z_l2", self.ln_z_l2),
            ("h_omega", self.ln_h_omega),
            ("y_h2", self.ln_y_h2),
            ("y_linf_v", self.ln_y_linf_v),
            ("z_h2", self.ln_z_h2),
            ("z_linf_v", self.ln_z_linf_v),
            ("state_defect", self.ln_state_defect),
            ("adjoint_defect", self.ln_adjoint_defect),
        ]
    }
}

fn h2_sq(f: &VelocityField) -> f64 {
    let lap = vector_laplacian(f);
    f.dot(f) + h1_seminorm_sq(f).max(0.0) + lap.dot(&lap)
}

/// `ln ( sum_k w_k W(t_k)^2 q_k )^{1/2}` over the nodes `k < nt`, with `W`
/// the product of `specs` and `q_k` a squared spatial norm.
fn ln_weighted_l2(grid: &GridSpec, specs: &[WeightSpec], q: impl Fn(usize) -> f64) -> Result<f64> {
    let mut acc = LogSum::default();
    for k in 0..grid.nt {
        let qk = q(k);
        if qk > 0.0 {
            let ln_w = ln_weight_product(specs, 0.0, grid.time(k), grid.horizon)?;
            acc.add(2.0 * ln_w + grid.time_weight(k).ln() + qk.ln());
        }
    }
    Ok(0.5 * acc.ln())
}

fn ln_weighted_sup(grid: &GridSpec, specs: &[WeightSpec], q: impl Fn(usize) -> f64) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for k in 0..grid.nt {
        let qk = q(k);
        if qk > 0.0 {
            let ln_w = ln_weight_product(specs, 0.0, grid.time(k), grid.horizon)?;
            best = best.max(ln_w + qk.ln());
        }
    }
    Ok(best)
}

/// Evaluates every addend by quadrature on the time nodes `t_k < T`; the
/// weights are infinite at `t = T`. `y` and the adjoint states
/// `sol.z_state` are the solution of the linear coupled system driven by
/// `h` with target `yd`.
#[allow(clippy::too_many_arguments)]
pub fn e_norm(
    solver: &FlowSolver,
    sol: &CoupledSolution,
    h: Option<&Trajectory>,
    yd: Option<&Trajectory>,
    carleman: &CarlemanParams,
    robust: &RobustParams,
    c0: f64,
) -> Result<ENormReport> {
    if !(c0 >= 2.5) {
        return Err(Error::Precondition(format!("c0 must be at least 5/2, got {c0}")));
    }
    let g = *solver.grid();
    for t in [Some(&sol.y), Some(&sol.z), Some(&sol.z_state), h, yd].into_iter().flatten() {
        t.check_grid(&g)?;
    }
    let geom = solver.geometry();
    let p = *carleman;
    let (a0, m0) = (p.a0(), p.m0());
    let exp = |f, c| WeightSpec::exponential(f, p, c);
    let pow = |f, e| WeightSpec::power(f, p, e);

    let y = &sol.y;
    let z = &sol.z_state;
    let y_l2 = ln_weighted_l2(&g, &[exp(Family::BetaStar, a0), pow(Family::TauHat, -2.5)], |k| {
        y.steps[k].dot(&y.steps[k])
    })?;
    let z_l2 = ln_weighted_l2(&g, &[exp(Family::BetaStar, a0)], |k| z.steps[k].dot(&z.steps[k]))?;
    let h_omega = match h {
        Some(h) => {
            let hw = h.hadamard(&geom.omega_mask);
            ln_weighted_l2(
                &g,
                &[
                    exp(Family::BetaStar, 2.0 * a0),
                    exp(Family::BetaHat, -(m0 - 2.0)),
                    pow(Family::TauHat, -7.5),
                ],
                |k| hw.steps[k].dot(&hw.steps[k]),
            )?
        }
        None => f64::NEG_INFINITY,
    };
    let y_w = [exp(Family::BetaStar, a0), pow(Family::TauHat, -7.5)];
    let y_h2 = ln_weighted_l2(&g, &y_w, |k| h2_sq(&y.steps[k]))?;
    let y_linf_v = ln_weighted_sup(&g, &y_w, |k| h1_seminorm_sq(&y.steps[k]).max(0.0).sqrt())?;
    let z_w = [exp(Family::BetaStar, a0), pow(Family::TauStar, -c0)];
    let z_h2 = ln_weighted_l2(&g, &z_w, |k| h2_sq(&z.steps[k]))?;
    let z_linf_v = ln_weighted_sup(&g, &z_w, |k| h1_seminorm_sq(&z.steps[k]).max(0.0).sqrt())?;

    let (state_defects, adjoint_defects) = scheme_defects(solver, sol, h, yd, robust);
    let state_defect = ln_weighted_l2(&g, &[exp(Family::BetaStar, m0), pow(Family::TauStar, -1.5)], |k| {
        state_defects[k].dot(&state_defects[k])
    })?;
    let adjoint_defect = ln_weighted_l2(&g, &[exp(Family::BetaStar, 2.0 * a0), pow(Family::TauStar, -1.5)], |k| {
        adjoint_defects[k].dot(&adjoint_defects[k])
    })?;

    let mut total = LogSum::default();
    for x in [y_l2, z_l2, h_omega, y_h2, y_linf_v, z_h2, z_linf_v, state_defect, adjoint_defect] {
        total.add(x);
    }
    Ok(ENormReport {
        ln_y_l2: y_l2,
        ln_z_l2: z_l2,
        ln_h_omega: h_omega,
        ln_y_h2: y_h2,
        ln_y_linf_v: y_linf_v,
        ln_z_h2: z_h2,
        ln_z_linf_v: z_linf_v,
        ln_state_defect: state_defect,
        ln_adjoint_defect: adjoint_defect,
        ln_total: total.ln(),
    })
}

/// Per-step defects of the discrete state and adjoint equations with the
/// coupling, leader and tracking terms removed, both indexed by the earlier
/// node. For a solution of the linear coupled system they reproduce the
/// (smoothed) sources `f1`, `f2`.
pub(crate) fn scheme_defects(
    solver: &FlowSolver,
    sol: &CoupledSolution,
    h: Option<&Trajectory>,
    yd: Option<&Trajectory>,
    robust: &RobustParams,
) -> (Vec<VelocityField>, Vec<VelocityField>) {
    let g = *solver.grid();
    let geom = solver.geometry();
    let (y, z) = (&sol.y, &sol.z_state);
    let dt = g.dt();
    let step = solver.step_operator();
    let mut forcing = sol.z.hadamard(&geom.coupling(robust));
    if let Some(h) = h {
        forcing.axpy(1.0, &h.hadamard(&geom.omega_mask));
    }
    let state = (0..g.nt)
        .map(|k| {
            let mut rhs = y.steps[k].clone();
            rhs.axpy(0.5 * dt, &forcing.steps[k]);
            rhs.axpy(0.5 * dt, &forcing.steps[k + 1]);
            y.steps[k + 1].sub(&step.apply(&rhs)).scaled(1.0 / dt)
        })
        .collect();
    let mut misfit = match yd {
        Some(yd) => y.sub(yd),
        None => y.clone(),
    };
    misfit = misfit.hadamard(&geom.observed_mask);
    misfit.scale(robust.mu);
    let adjoint = (1..=g.nt)
        .map(|k| {
            let mut rhs = z.steps[k].clone();
            rhs.axpy(g.time_weight(k), &misfit.steps[k]);
            z.steps[k - 1].sub(&step.apply(&rhs)).scaled(1.0 / dt)
        })
        .collect();
    (state, adjoint)
}

/// Natural logs of the weighted sizes `|e^{m0 s b*} tau*^{-3/2} f1|` and
/// `|e^{2 a0 s b*} tau*^{-3/2} f2|` of the sources of the linear coupled system.
pub fn source_weighted_norms(
    f1: Option<&Trajectory>,
    f2: Option<&Trajectory>,
    carleman: &CarlemanParams,
) -> Result<(f64, f64)> {
    let p = *carleman;
    let norm = |f: Option<&Trajectory>, coef: f64| -> Result<f64> {
        match f {
            Some(f) => ln_weighted_l2(
                &f.grid,
                &[
                    WeightSpec::exponential(Family::BetaStar, p, coef),
                    WeightSpec::power(Family::TauStar, p, -1.5),
                ],
                |k| f.steps[k].dot(&f.steps[k]),
            ),
            None => Ok(f64::NEG_INFINITY),
        }
    };
    Ok((norm(f1, p.m0())?, norm(f2, 2.0 * p.a0())?))
}

/// `ln |rho yd|` on the tracking region with `rho = e^{a0 s b*} tau*^{-c0}`.
pub fn target_weighted_norm(
    yd: &Trajectory,
    observed_mask: &VelocityField,
    carleman: &CarlemanParams,
    c0: f64,
) -> Result<f64> {
    if !(c0 >= 2.5) {
        return Err(Error::Precondition(format!("c0 must be at least 5/2, got {c0}")));
    }
    let p = *carleman;
    let masked = yd.hadamard(observed_mask);
    ln_weighted_l2(
        &yd.grid,
        &[
            WeightSpec::exponential(Family::BetaStar, p, p.a0()),
            WeightSpec::power(Family::TauStar, p, -c0),
        ],
        |k| masked.steps[k].dot(&masked.steps[k]),
    )
}

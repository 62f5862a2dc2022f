use rand::Rng;
use serde::{Deserialize, Serialize};

use super::eta::eta_field;
use super::params::CarlemanParams;
use super::weights::{ln_weight_product, Family, WeightSpec};
use super::{face_areas, LogSum};
use crate::error::Result;
use crate::grid_fields::ops::random_stream_velocity;
use crate::grid_fields::VelocityField;
use crate::robust_saddle::RobustParams;
use crate::stokes_core::{FlowSolver, SolverOptions};

/// Both sides of the weighted observability inequality for one terminal datum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityQuotient {
    pub ln_lhs: f64,
    pub ln_rhs: f64,
    /// `lhs / rhs`, 0 when both vanish, `inf` when only the right side does.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub samples: Vec<ObservabilityQuotient>,
    pub max_ratio: f64,
    /// Samples with a vanishing local term but a nonzero global one.
    pub red_flags: usize,
}

/// Solves the adjoint system from `phi_t` (no sources) and compares
/// `|phi(0)|^2 + int e^{-2 m0 s b*} tau*^3 |phi|^2 + int e^{-2 (a0+1) s b*} tau*^3 |theta|^2`
/// with `int_{omega x (0,T)} e^{-4 a0 s b* + 2 (m0 - 2) s b} tau_hat^15 |phi|^2`.
/// The node `t = T`, where every weight vanishes, is left out of the
/// trapezoid sums.
pub fn observability_quotient(
    solver: &FlowSolver,
    carleman: &CarlemanParams,
    robust: &RobustParams,
    opts: &SolverOptions,
    phi_t: &VelocityField,
) -> Result<ObservabilityQuotient> {
    let g = *solver.grid();
    let geom = solver.geometry();
    let eta = eta_field(&g, &geom.omega0)?;
    let opts = SolverOptions {
        convection_on: false,
        ..*opts
    };
    let adj = solver.solve_backward_adjoint(phi_t, None, None, None, robust, &opts)?;
    let (a0, m0) = (carleman.a0(), carleman.m0());
    let p = *carleman;
    let phi_weight = [
        WeightSpec::exponential(Family::BetaStar, p, -2.0 * m0),
        WeightSpec::power(Family::TauStar, p, 3.0),
    ];
    let theta_weight = [
        WeightSpec::exponential(Family::BetaStar, p, -2.0 * (a0 + 1.0)),
        WeightSpec::power(Family::TauStar, p, 3.0),
    ];
    let local_weight = [
        WeightSpec::exponential(Family::BetaStar, p, -4.0 * a0),
        WeightSpec::exponential(Family::Beta, p, 2.0 * (m0 - 2.0)),
        WeightSpec::power(Family::TauHat, p, 15.0),
    ];
    let areas = face_areas(&g);
    let mask = &geom.omega_mask;

    let mut lhs = LogSum::default();
    let phi0 = &adj.phi_state.steps[0];
    lhs.add(phi0.dot(phi0).ln());
    let mut rhs = LogSum::default();
    for k in 0..g.nt {
        let t = g.time(k);
        let w = g.time_weight(k).ln();
        let phi = &adj.phi_state.steps[k];
        let theta = &adj.theta.steps[k];
        lhs.add(ln_weight_product(&phi_weight, 0.0, t, g.horizon)? + w + phi.dot(phi).ln());
        lhs.add(ln_weight_product(&theta_weight, 0.0, t, g.horizon)? + w + theta.dot(theta).ln());
        let faces = phi
            .u
            .iter()
            .zip(&mask.u)
            .zip(areas.u.iter().zip(&eta.faces.u))
            .chain(phi.v.iter().zip(&mask.v).zip(areas.v.iter().zip(&eta.faces.v)));
        for ((&f, &m), (&a, &e)) in faces {
            let mass = f * f * m * a;
            if mass > 0.0 {
                rhs.add(ln_weight_product(&local_weight, e, t, g.horizon)? + w + mass.ln());
            }
        }
    }
    let (ln_lhs, ln_rhs) = (lhs.ln(), rhs.ln());
    let ratio = if ln_lhs == f64::NEG_INFINITY {
        0.0
    } else {
        (ln_lhs - ln_rhs).exp()
    };
    Ok(ObservabilityQuotient { ln_lhs, ln_rhs, ratio })
}

/// Empirical observability constant: the largest quotient over `n_samples`
/// smooth random divergence-free terminal data.
pub fn observability_ratio(
    solver: &FlowSolver,
    carleman: &CarlemanParams,
    robust: &RobustParams,
    opts: &SolverOptions,
    n_samples: usize,
    rng: &mut impl Rng,
) -> Result<ObservabilityReport> {
    let g = *solver.grid();
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let phi_t = random_stream_velocity(&g, rng, 4);
        samples.push(observability_quotient(solver, carleman, robust, opts, &phi_t)?);
    }
    let red_flags = samples
        .iter()
        .filter(|q| q.ln_rhs == f64::NEG_INFINITY && q.ln_lhs > f64::NEG_INFINITY)
        .count();
    let max_ratio = samples.iter().map(|q| q.ratio).fold(0.0, f64::max);
    Ok(ObservabilityReport {
        samples,
        max_ratio,
        red_flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_fields::GridSpec;
    use crate::stokes_core::ControlGeometry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn solver(nt: usize) -> FlowSolver {
        let g = GridSpec::new(16, 16, 20.0, 20.0, nt, 20.0).unwrap();
        FlowSolver::new(ControlGeometry::default_layout(&g).unwrap()).unwrap()
    }

    #[test]
    fn zero_terminal_data_gives_zero() {
        let s = solver(16);
        let z = VelocityField::zeros(s.grid());
        let q = observability_quotient(&s, &CarlemanParams::default(), &RobustParams::default(), &SolverOptions::default(), &z)
            .unwrap();
        assert_eq!(q.ratio, 0.0);
    }

    #[test]
    fn decoupled_system_has_finite_ratio() {
        let s = solver(16);
        let robust = RobustParams::new(f64::INFINITY, f64::INFINITY, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = observability_ratio(&s, &CarlemanParams::default(), &robust, &SolverOptions::default(), 4, &mut rng)
            .unwrap();
        assert_eq!(r.red_flags, 0);
        assert!(r.max_ratio.is_finite() && r.max_ratio > 0.0, "{}", r.max_ratio);
    }
}

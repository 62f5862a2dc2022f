use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::functional::SaddleProblem;
use super::params::RobustParams;
use crate::error::{Error, Result};
use crate::grid_fields::{SpaceWeight, Trajectory, VelocityField};
use crate::stokes_core::CoupledData;

/// Follower/disturbance saddle point and its first-order residuals.
#[derive(Debug, Clone)]
pub struct SaddleResult {
    pub v_bar: Trajectory,
    pub psi_bar: Trajectory,
    pub y: Trajectory,
    pub z: Trajectory,
    pub residual_v: f64,
    pub residual_psi: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Controls for [`SaddleProblem::saddle_ascent_descent`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AscentOptions {
    pub max_iters: usize,
    /// Relative tolerance on the scaled first-order residuals.
    pub tol: f64,
    /// Override for the follower step; default `1/(ell^2 + L)`.
    pub step_v: Option<f64>,
    /// Override for the disturbance step; default `1/gamma^2`.
    pub step_psi: Option<f64>,
    /// Disturbance growth factor certifying divergence.
    pub divergence_factor: f64,
    pub power_iterations: usize,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions {
            max_iters: 500,
            tol: 1e-10,
            step_v: None,
            step_psi: None,
            divergence_factor: 1e6,
            power_iterations: 5,
        }
    }
}

/// One saddle probe: perturbation size and the signed margins of both
/// inequalities (non-negative when satisfied).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub index: usize,
    pub magnitude: f64,
    pub psi_margin: f64,
    pub v_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleReport {
    pub j_bar: f64,
    pub scale: f64,
    pub tol: f64,
    pub probes: Vec<ProbeRecord>,
    pub worst_psi_margin: f64,
    pub worst_v_margin: f64,
    pub violations: usize,
}

/// Which end of the candidate grid the threshold scan could not bracket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OneSided {
    /// Converged on the whole grid: the threshold is below the grid minimum.
    BelowGrid,
    /// Converged nowhere: the threshold is above the grid maximum.
    AboveGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gamma0Bracket {
    pub lower: f64,
    pub upper: f64,
    pub one_sided: Option<OneSided>,
    /// Every evaluated `(gamma, converged)` pair in evaluation order.
    pub evaluations: Vec<(f64, bool)>,
}

fn norm(t: &Trajectory) -> f64 {
    t.norm()
}

impl<'a> SaddleProblem<'a> {
    fn first_order_residuals(&self, psi: &Trajectory, v: &Trajectory) -> Result<(Trajectory, Trajectory, f64, f64)> {
        let y = self.state(psi, v)?;
        let z = self.tracking_adjoint(&y)?;
        let (gp, gv) = self.gradients_from_adjoint(psi, v, &z);
        Ok((y, z, norm(&gv), norm(&gp)))
    }

    /// Saddle point from the coupled optimality system:
    /// `psi = gamma^-2 z`, `v = -ell^-2 z` on the follower region.
    pub fn saddle_from_coupled(&self) -> Result<SaddleResult> {
        let data = CoupledData {
            h: self.h,
            y0: self.y0,
            yd: self.yd,
            f1: None,
            f2: None,
        };
        let sol = if self.opts.convection_on {
            self.solver.solve_coupled_nonlinear(&data, &self.params, &self.opts, None)?
        } else {
            self.solver.solve_coupled_linear(&data, &self.params, &self.opts, None)?
        };
        let geom = self.solver.geometry();
        let psi_bar = sol.z.scaled(self.params.inv_gamma2());
        let v_bar = sol.z.hadamard(&geom.follower_indicator).scaled(-self.params.inv_ell2());
        let (y, z, residual_v, residual_psi) = self.first_order_residuals(&psi_bar, &v_bar)?;
        Ok(SaddleResult {
            v_bar,
            psi_bar,
            y,
            z,
            residual_v,
            residual_psi,
            converged: true,
            iterations: sol.iterations,
        })
    }

    /// Largest eigenvalue of the tracking Hessian (forcing to tracking
    /// adjoint, affine offset removed), by power iteration.
    pub fn tracking_lipschitz(&self, iterations: usize) -> Result<f64> {
        let g = *self.solver.grid();
        let zero_y0 = VelocityField::zeros(&g);
        let lin = SaddleProblem {
            h: None,
            y0: &zero_y0,
            yd: None,
            ..*self
        };
        let mut x = Trajectory::from_fn(&g, |t| {
            let s = 1.0 + t / g.horizon;
            VelocityField::from_fn(&g, |a, b| s * (a * b).sin(), |a, b| s * (a - b).cos())
        });
        let zero = Trajectory::zeros(&g);
        let mut lambda = 0.0;
        for _ in 0..iterations.max(1) {
            let n = norm(&x);
            if n == 0.0 {
                return Ok(0.0);
            }
            x.scale(1.0 / n);
            let y = lin.state(&x, &zero)?;
            let hx = lin.tracking_adjoint(&y)?;
            lambda = hx.inner(&x, SpaceWeight::Uniform);
            x = hx;
        }
        Ok(lambda.max(0.0))
    }

    /// Alternating ascent in `psi` and descent in `v` on the robust
    /// functional. The follower step uses the cutoff-weighted metric, so the
    /// update direction is `ell^2 v + z` on the follower region.
    pub fn saddle_ascent_descent(&self, cfg: &AscentOptions) -> Result<SaddleResult> {
        let g = *self.solver.grid();
        let geom = self.solver.geometry();
        let p = self.params;
        let lip = if cfg.step_v.is_none() {
            self.tracking_lipschitz(cfg.power_iterations)?
        } else {
            0.0
        };
        let eta_v = cfg.step_v.unwrap_or(1.0 / (p.ell2() + lip));
        let eta_psi = cfg.step_psi.unwrap_or(1.0 / p.gamma2());
        let mut psi = Trajectory::zeros(&g);
        let mut v = Trajectory::zeros(&g);
        let mut psi_ref = 0.0;

        for it in 1..=cfg.max_iters {
            // ascent in psi
            let y = self.state(&psi, &v)?;
            let z = self.tracking_adjoint(&y)?;
            let (gp, _) = self.gradients_from_adjoint(&psi, &v, &z);
            psi.axpy(eta_psi, &gp);
            let pn = norm(&psi);
            if it == 1 {
                psi_ref = pn;
            }
            if !pn.is_finite() || (psi_ref > 0.0 && pn > cfg.divergence_factor * psi_ref) {
                return Err(Error::Divergence {
                    iterations: it,
                    psi_norm: pn,
                });
            }
            // descent in v
            let y = self.state(&psi, &v)?;
            let z = self.tracking_adjoint(&y)?;
            let mut dir = z.clone();
            dir.axpy(p.ell2(), &v);
            let dir = dir.hadamard(&geom.follower_indicator);
            v.axpy(-eta_v, &dir);

            // stationarity check at the updated pair
            let y = self.state(&psi, &v)?;
            let z = self.tracking_adjoint(&y)?;
            let (gp, _) = self.gradients_from_adjoint(&psi, &v, &z);
            let mut gv_full = z.clone();
            gv_full.axpy(p.ell2(), &v);
            let gv_full = gv_full.hadamard(&geom.follower_indicator);
            let scaled = norm(&gp) / p.gamma2() + norm(&gv_full) / p.ell2();
            let size = norm(&psi) + norm(&v);
            if scaled <= cfg.tol * size || size == 0.0 && scaled == 0.0 {
                let (gp, gv) = self.gradients_from_adjoint(&psi, &v, &z);
                return Ok(SaddleResult {
                    residual_v: norm(&gv),
                    residual_psi: norm(&gp),
                    v_bar: v,
                    psi_bar: psi,
                    y,
                    z,
                    converged: true,
                    iterations: it,
                });
            }
        }
        let y = self.state(&psi, &v)?;
        let z = self.tracking_adjoint(&y)?;
        let (gp, gv) = self.gradients_from_adjoint(&psi, &v, &z);
        Ok(SaddleResult {
            residual_v: norm(&gv),
            residual_psi: norm(&gp),
            v_bar: v,
            psi_bar: psi,
            y,
            z,
            converged: false,
            iterations: cfg.max_iters,
        })
    }

    /// Evaluates both saddle inequalities along `n_probes` perturbations of
    /// geometrically spread magnitudes. Half of the probes move along the
    /// saddle components themselves; the rest along random directions.
    pub fn probe_saddle<R: Rng>(
        &self,
        result: &SaddleResult,
        n_probes: usize,
        rng: &mut R,
    ) -> Result<SaddleReport> {
        let g = *self.solver.grid();
        let geom = self.solver.geometry();
        let p = self.params;
        let (psi_bar, v_bar) = (&result.psi_bar, &result.v_bar);
        let j_bar = self.eval_jr(psi_bar, v_bar)?;
        let scale = j_bar.abs()
            + p.gamma2() * psi_bar.inner(psi_bar, SpaceWeight::Uniform)
            + p.ell2() * v_bar.inner(v_bar, SpaceWeight::Faces(&geom.chi))
            + f64::MIN_POSITIVE;
        let tol = 1e-8 * scale;
        let reference = norm(psi_bar).max(norm(v_bar)).max(1e-3);

        let random_dir = |rng: &mut R, mask: Option<&VelocityField>| -> Trajectory {
            let mut steps = Vec::with_capacity(g.nt + 1);
            for _ in 0..=g.nt {
                let mut f = VelocityField::zeros(&g);
                f.u.iter_mut()
                    .chain(f.v.iter_mut())
                    .for_each(|x| *x = rng.sample::<f64, _>(StandardNormal));
                f.apply_dirichlet();
                if let Some(m) = mask {
                    f.hadamard_assign(m);
                }
                steps.push(f);
            }
            Trajectory { grid: g, steps }
        };
        let unit = |t: Trajectory| -> Trajectory {
            let n = norm(&t);
            if n > 0.0 {
                t.scaled(1.0 / n)
            } else {
                t
            }
        };

        let mut probes = Vec::with_capacity(n_probes);
        for i in 0..n_probes {
            let exponent = -3.0 + 3.0 * ((i % 7) as f64) / 6.0;
            let magnitude = reference * 10f64.powf(exponent);
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let (dpsi, dv) = if i % 4 < 2 && norm(psi_bar) > 0.0 && norm(v_bar) > 0.0 {
                (unit(psi_bar.scaled(sign)), unit(v_bar.scaled(sign)))
            } else {
                (
                    unit(random_dir(rng, None)),
                    unit(random_dir(rng, Some(&geom.follower_indicator))),
                )
            };
            let j_psi = self.eval_jr(&psi_bar.add(&dpsi.scaled(magnitude)), v_bar)?;
            let j_v = self.eval_jr(psi_bar, &v_bar.add(&dv.scaled(magnitude)))?;
            probes.push(ProbeRecord {
                index: i,
                magnitude,
                psi_margin: j_bar - j_psi,
                v_margin: j_v - j_bar,
            });
        }
        let worst_psi_margin = probes.iter().map(|r| r.psi_margin).fold(f64::INFINITY, f64::min);
        let worst_v_margin = probes.iter().map(|r| r.v_margin).fold(f64::INFINITY, f64::min);
        let violations = probes
            .iter()
            .filter(|r| r.psi_margin < -tol || r.v_margin < -tol)
            .count();
        Ok(SaddleReport {
            j_bar,
            scale,
            tol,
            probes,
            worst_psi_margin,
            worst_v_margin,
            violations,
        })
    }

    /// Checks `J(psi, v_bar) <= J(psi_bar, v_bar) <= J(psi_bar, v)` on random
    /// probes; fails with the worst violating probe.
    pub fn verify_saddle<R: Rng>(
        &self,
        result: &SaddleResult,
        n_probes: usize,
        rng: &mut R,
    ) -> Result<SaddleReport> {
        if !result.converged {
            return Err(Error::Precondition("saddle result has not converged".into()));
        }
        let report = self.probe_saddle(result, n_probes, rng)?;
        let worst = report
            .probes
            .iter()
            .flat_map(|r| [(r.index, "disturbance", r.psi_margin), (r.index, "follower", r.v_margin)])
            .min_by(|a, b| a.2.total_cmp(&b.2));
        if let Some((probe, side, margin)) = worst {
            if margin < -report.tol {
                return Err(Error::SaddleViolation {
                    probe,
                    side,
                    margin,
                    tol: report.tol,
                });
            }
        }
        Ok(report)
    }
}

/// Brackets the smallest disturbance weight for which ascent-descent
/// converges, by bisection over the indices of an ascending grid.
pub fn estimate_gamma0(
    problem: &SaddleProblem<'_>,
    ell: f64,
    mu: f64,
    gamma_grid: &[f64],
    cfg: &AscentOptions,
) -> Result<Gamma0Bracket> {
    if gamma_grid.is_empty() || gamma_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("gamma grid must be non-empty and strictly ascending".into()));
    }
    let mut evaluations = Vec::new();
    let mut converges = |gamma: f64| -> Result<bool> {
        let params = RobustParams::new(ell, gamma, mu)?;
        let ok = match problem.with_params(params).saddle_ascent_descent(cfg) {
            Ok(r) => r.converged,
            Err(Error::Divergence { .. }) | Err(Error::BlowUp { .. }) => false,
            Err(e) => return Err(e),
        };
        evaluations.push((gamma, ok));
        Ok(ok)
    };
    let n = gamma_grid.len();
    if converges(gamma_grid[0])? {
        return Ok(Gamma0Bracket {
            lower: 0.0,
            upper: gamma_grid[0],
            one_sided: Some(OneSided::BelowGrid),
            evaluations,
        });
    }
    if !converges(gamma_grid[n - 1])? {
        return Ok(Gamma0Bracket {
            lower: gamma_grid[n - 1],
            upper: f64::INFINITY,
            one_sided: Some(OneSided::AboveGrid),
            evaluations,
        });
    }
    let (mut lo, mut hi) = (0, n - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if converges(gamma_grid[mid])? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Gamma0Bracket {
        lower: gamma_grid[lo],
        upper: gamma_grid[hi],
        one_sided: None,
        evaluations,
    })
}

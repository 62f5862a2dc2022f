use super::convection::ConvectionStencil;
use super::forcing::{ControlGeometry, ForcingAssembly, SolverOptions};
use super::step::StokesStep;
use crate::error::{Error, Result};
use crate::grid_fields::{divergence, project_div_free, GridSpec, Trajectory, VelocityField};
use crate::robust_saddle::RobustParams;

const BLOWUP_FACTOR: f64 = 1e6;
const MIN_RELAX: f64 = 1.0 / 1024.0;

/// Data of the coupled optimality system. Absent trajectories are zero.
#[derive(Debug, Clone, Copy)]
pub struct CoupledData<'a> {
    pub h: Option<&'a Trajectory>,
    pub y0: &'a VelocityField,
    pub yd: Option<&'a Trajectory>,
    pub f1: Option<&'a Trajectory>,
    pub f2: Option<&'a Trajectory>,
}

impl<'a> CoupledData<'a> {
    pub fn new(y0: &'a VelocityField) -> Self {
        CoupledData {
            h: None,
            y0,
            yd: None,
            f1: None,
            f2: None,
        }
    }

    pub fn with_h(self, h: &'a Trajectory) -> Self {
        CoupledData { h: Some(h), ..self }
    }

    pub fn with_yd(self, yd: &'a Trajectory) -> Self {
        CoupledData { yd: Some(yd), ..self }
    }

    pub fn with_sources(self, f1: Option<&'a Trajectory>, f2: Option<&'a Trajectory>) -> Self {
        CoupledData { f1, f2, ..self }
    }
}

/// Solution of the coupled forward/backward system.
///
/// `z` is the adjoint as it multiplies forcings (node averages of the
/// backward states); `z_state` holds the backward states themselves, with
/// `z_state(T) = 0` exactly.
#[derive(Debug, Clone)]
pub struct CoupledSolution {
    pub y: Trajectory,
    pub z: Trajectory,
    pub z_state: Trajectory,
    pub iterations: usize,
    pub residual: f64,
}

/// Solution of the non-homogeneous adjoint system.
#[derive(Debug, Clone)]
pub struct AdjointSolution {
    /// Backward adjoint in forcing form.
    pub phi: Trajectory,
    /// Backward adjoint states, `phi_state(T) = phi_T`.
    pub phi_state: Trajectory,
    /// Forward companion, `theta(0) = 0`.
    pub theta: Trajectory,
    pub iterations: usize,
    pub residual: f64,
}

/// Maps backward states `rho_k` to the field that pairs with nodal forcing
/// under trapezoid quadrature.
pub fn forcing_representer(rho: &Trajectory) -> Trajectory {
    let nt = rho.nt();
    let mut steps = Vec::with_capacity(nt + 1);
    steps.push(rho.steps[0].clone());
    for k in 1..nt {
        let mut s = rho.steps[k - 1].add(&rho.steps[k]);
        s.scale(0.5);
        steps.push(s);
    }
    steps.push(rho.steps[nt - 1].clone());
    Trajectory {
        grid: rho.grid,
        steps,
    }
}

/// Time integrator for the Stokes and Navier-Stokes systems and the coupled
/// optimality systems on a fixed grid and control geometry.
#[derive(Debug, Clone)]
pub struct FlowSolver {
    geom: ControlGeometry,
    step: StokesStep,
    stencil: ConvectionStencil,
}

fn relative_change(new: &Trajectory, old: &Trajectory) -> f64 {
    let scale = new.norm().max(old.norm());
    if scale == 0.0 {
        0.0
    } else {
        new.sub(old).norm() / scale
    }
}

impl FlowSolver {
    pub fn new(geom: ControlGeometry) -> Result<Self> {
        let g = geom.grid;
        g.validate()?;
        let step = StokesStep::new(&g, g.dt())?;
        let stencil = ConvectionStencil::new(g.nx, g.ny, g.hx(), g.hy());
        Ok(FlowSolver {
            geom,
            step,
            stencil,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.geom.grid
    }

    pub fn geometry(&self) -> &ControlGeometry {
        &self.geom
    }

    pub fn stencil(&self) -> &ConvectionStencil {
        &self.stencil
    }

    pub fn step_operator(&self) -> &StokesStep {
        &self.step
    }

    fn admissible_initial(&self, y0: &VelocityField) -> Result<VelocityField> {
        if !y0.conforms(self.grid()) {
            return Err(Error::Shape(format!(
                "initial field {}x{} on grid {}x{}",
                y0.nx,
                y0.ny,
                self.grid().nx,
                self.grid().ny
            )));
        }
        let mut y = y0.clone();
        y.apply_dirichlet();
        if y != *y0 || divergence(&y).max_abs() > 1e-10 {
            y = project_div_free(&y)?;
        }
        Ok(y)
    }

    /// Forward sweep `y_{k+1} = S(y_k + dt/2 (f_k + f_{k+1}) + dt e_k)`, where
    /// `e_k` collects the explicit source, `-N(y_k)` when `convection` is set,
    /// and `-N'(link_k) y_k` when a linearisation point is given.
    pub fn forward_sweep(
        &self,
        y0: &VelocityField,
        nodal: Option<&Trajectory>,
        explicit: Option<&Trajectory>,
        convection: bool,
        link: Option<&Trajectory>,
    ) -> Result<Trajectory> {
        let g = *self.grid();
        for t in [nodal, explicit, link].into_iter().flatten() {
            t.check_grid(&g)?;
        }
        let dt = g.dt();
        let mut scale = y0.norm();
        for k in 0..g.nt {
            if let Some(f) = nodal {
                scale += dt * f.steps[k].norm();
            }
            if let Some(e) = explicit {
                scale += dt * e.steps[k].norm();
            }
        }
        let bound = BLOWUP_FACTOR * scale.max(f64::MIN_POSITIVE);
        let mut steps = Vec::with_capacity(g.nt + 1);
        steps.push(y0.clone());
        for k in 0..g.nt {
            let yk = &steps[k];
            let mut rhs = yk.clone();
            if let Some(f) = nodal {
                rhs.axpy(0.5 * dt, &f.steps[k]);
                rhs.axpy(0.5 * dt, &f.steps[k + 1]);
            }
            if let Some(e) = explicit {
                rhs.axpy(dt, &e.steps[k]);
            }
            if convection {
                let courant = dt * (max_abs(&yk.u) / yk.hx + max_abs(&yk.v) / yk.hy);
                if courant > 1.0 {
                    return Err(Error::Cfl { step: k, courant });
                }
                rhs.axpy(-dt, &self.stencil.apply(yk));
            }
            if let Some(l) = link {
                rhs.axpy(-dt, &self.stencil.linearized(&l.steps[k], yk));
            }
            let next = self.step.apply(&rhs);
            let n = next.norm();
            if !n.is_finite() || n > bound {
                return Err(Error::BlowUp { step: k + 1, norm: n });
            }
            steps.push(next);
        }
        Ok(Trajectory { grid: g, steps })
    }

    /// Backward sweep in state form:
    /// `rho_nt = terminal`, `rho_{k-1} = S(rho_k + w_k s_k + dt e_k - dt N'(link_k)^T rho_k)`,
    /// with trapezoid weights `w_k` and the link term omitted at `k = nt`.
    /// This is the exact transpose of [`forward_sweep`](Self::forward_sweep).
    pub fn backward_sweep(
        &self,
        terminal: &VelocityField,
        source: Option<&Trajectory>,
        explicit: Option<&Trajectory>,
        link: Option<&Trajectory>,
    ) -> Result<Trajectory> {
        let g = *self.grid();
        for t in [source, explicit, link].into_iter().flatten() {
            t.check_grid(&g)?;
        }
        let dt = g.dt();
        let nt = g.nt;
        let mut steps = vec![VelocityField::zeros(&g); nt + 1];
        steps[nt] = terminal.clone();
        for k in (1..=nt).rev() {
            let rk = &steps[k];
            let mut rhs = rk.clone();
            if let Some(s) = source {
                rhs.axpy(g.time_weight(k), &s.steps[k]);
            }
            if let Some(e) = explicit {
                rhs.axpy(dt, &e.steps[k]);
            }
            if let (Some(l), true) = (link, k < nt) {
                rhs.axpy(-dt, &self.stencil.linearized_transpose(&l.steps[k], rk));
            }
            let prev = self.step.apply(&rhs);
            if !prev.is_finite() {
                return Err(Error::BlowUp { step: k - 1, norm: f64::INFINITY });
            }
            steps[k - 1] = prev;
        }
        Ok(Trajectory { grid: g, steps })
    }

    /// Stokes (or Navier-Stokes with `opts.convection_on`) trajectory driven
    /// by the assembled forcing. `y0` is projected if it is not divergence free.
    pub fn solve_forward(
        &self,
        y0: &VelocityField,
        forcing: &ForcingAssembly,
        opts: &SolverOptions,
    ) -> Result<Trajectory> {
        opts.validate()?;
        let y0 = self.admissible_initial(y0)?;
        let nodal = forcing.nodal(&self.geom)?;
        self.forward_sweep(
            &y0,
            nodal.as_ref(),
            forcing.extra_source.as_ref(),
            opts.convection_on,
            None,
        )
    }

    /// Adjoint system: `phi` backward from `phi_t` with source
    /// `g1 + mu theta 1_{O_d}`, `theta` forward from zero with forcing
    /// `g2 + (gamma^-2 - ell^-2 chi) phi`, solved by Picard sweeps.
    pub fn solve_backward_adjoint(
        &self,
        phi_t: &VelocityField,
        g1: Option<&Trajectory>,
        g2: Option<&Trajectory>,
        link: Option<&Trajectory>,
        params: &RobustParams,
        opts: &SolverOptions,
    ) -> Result<AdjointSolution> {
        params.validate()?;
        opts.validate()?;
        let g = *self.grid();
        let phi_t = self.admissible_initial(phi_t)?;
        let coupling = self.geom.coupling(params);
        let zero = VelocityField::zeros(&g);
        let mut theta = Trajectory::zeros(&g);
        let mut relax = opts.relax;
        let mut prev_res = f64::INFINITY;
        for it in 1..=opts.picard_max {
            let (phi_state, phi, theta_new) =
                self.adjoint_pass(&phi_t, &theta, g1, g2, link, params, &coupling, &zero)?;
            let res = relative_change(&theta_new, &theta);
            if res <= opts.picard_tol {
                let (phi_state, phi, theta) = if res == 0.0 {
                    (phi_state, phi, theta_new)
                } else {
                    let (ps, p, _) =
                        self.adjoint_pass(&phi_t, &theta_new, g1, g2, link, params, &coupling, &zero)?;
                    (ps, p, theta_new)
                };
                return Ok(AdjointSolution {
                    phi,
                    phi_state,
                    theta,
                    iterations: it,
                    residual: res,
                });
            }
            if res > prev_res {
                relax = (0.5 * relax).max(MIN_RELAX);
            }
            prev_res = res;
            let mut step = theta_new;
            step.axpy(-1.0, &theta);
            theta.axpy(relax, &step);
        }
        Err(Error::Picard {
            solver: "adjoint system",
            iterations: opts.picard_max,
            residual: prev_res,
            hint: "increase gamma and ell or decrease mu",
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn adjoint_pass(
        &self,
        phi_t: &VelocityField,
        theta: &Trajectory,
        g1: Option<&Trajectory>,
        g2: Option<&Trajectory>,
        link: Option<&Trajectory>,
        params: &RobustParams,
        coupling: &VelocityField,
        zero: &VelocityField,
    ) -> Result<(Trajectory, Trajectory, Trajectory)> {
        let mut src = theta.hadamard(&self.geom.observed_mask);
        src.scale(params.mu);
        if let Some(g1) = g1 {
            src.axpy(1.0, g1);
        }
        let phi_state = self.backward_sweep(phi_t, Some(&src), None, link)?;
        let phi = forcing_representer(&phi_state);
        let mut f = phi.hadamard(coupling);
        if let Some(g2) = g2 {
            f.axpy(1.0, g2);
        }
        let theta_new = self.forward_sweep(zero, Some(&f), None, false, link)?;
        Ok((phi_state, phi, theta_new))
    }

    /// Linear coupled system: `y` forward with forcing
    /// `1_omega h + (gamma^-2 - ell^-2 chi) z` and explicit source `f1`, `z`
    /// backward from zero with source `mu 1_{O_d} (y - yd)` and `f2`.
    pub fn solve_coupled_linear(
        &self,
        data: &CoupledData<'_>,
        params: &RobustParams,
        opts: &SolverOptions,
        initial_z: Option<&Trajectory>,
    ) -> Result<CoupledSolution> {
        self.coupled(data, params, opts, initial_z, false, "coupled linear system")
    }

    /// Nonlinear coupled system: as the linear one with advection in the
    /// forward equation and the adjoint coupling `N'(y)^T z` in the backward
    /// equation.
    pub fn solve_coupled_nonlinear(
        &self,
        data: &CoupledData<'_>,
        params: &RobustParams,
        opts: &SolverOptions,
        initial_z: Option<&Trajectory>,
    ) -> Result<CoupledSolution> {
        self.coupled(data, params, opts, initial_z, true, "coupled nonlinear system")
    }

    fn coupled(
        &self,
        data: &CoupledData<'_>,
        params: &RobustParams,
        opts: &SolverOptions,
        initial_z: Option<&Trajectory>,
        nonlinear: bool,
        name: &'static str,
    ) -> Result<CoupledSolution> {
        params.validate()?;
        opts.validate()?;
        let g = *self.grid();
        let y0 = self.admissible_initial(data.y0)?;
        for t in [data.h, data.yd, data.f1, data.f2, initial_z].into_iter().flatten() {
            t.check_grid(&g)?;
        }
        let coupling = self.geom.coupling(params);
        let leader = data.h.map(|h| h.hadamard(&self.geom.omega_mask));
        let mut z = initial_z.cloned().unwrap_or_else(|| Trajectory::zeros(&g));
        let mut relax = opts.relax;
        let mut prev_res = f64::INFINITY;

        let forward = |z: &Trajectory| -> Result<Trajectory> {
            let mut f = z.hadamard(&coupling);
            if let Some(l) = &leader {
                f.axpy(1.0, l);
            }
            self.forward_sweep(&y0, Some(&f), data.f1, nonlinear, None)
        };
        let backward = |y: &Trajectory| -> Result<Trajectory> {
            let mut s = match data.yd {
                Some(yd) => y.sub(yd),
                None => y.clone(),
            };
            s = s.hadamard(&self.geom.observed_mask);
            s.scale(params.mu);
            let link = if nonlinear { Some(y) } else { None };
            let zero = VelocityField::zeros(&g);
            self.backward_sweep(&zero, Some(&s), data.f2, link)
        };

        for it in 1..=opts.picard_max {
            let y = forward(&z)?;
            let z_state = backward(&y)?;
            let z_new = forcing_representer(&z_state);
            let res = relative_change(&z_new, &z);
            if res <= opts.picard_tol {
                let y = if res == 0.0 { y } else { forward(&z_new)? };
                return Ok(CoupledSolution {
                    y,
                    z: z_new,
                    z_state,
                    iterations: it,
                    residual: res,
                });
            }
            if res > prev_res {
                relax = (0.5 * relax).max(MIN_RELAX);
            }
            prev_res = res;
            let mut step = z_new;
            step.axpy(-1.0, &z);
            z.axpy(relax, &step);
        }
        Err(Error::Picard {
            solver: name,
            iterations: opts.picard_max,
            residual: prev_res,
            hint: if nonlinear {
                "reduce the initial data size delta or the horizon T, or increase gamma and ell"
            } else {
                "increase gamma and ell"
            },
        })
    }
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_fields::stream_velocity;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn solver(n: usize, nt: usize, horizon: f64) -> FlowSolver {
        let g = GridSpec::unit(n, nt, horizon).unwrap();
        FlowSolver::new(ControlGeometry::default_layout(&g).unwrap()).unwrap()
    }

    fn random_field(g: &GridSpec, rng: &mut ChaCha8Rng) -> VelocityField {
        let mut f = VelocityField::zeros(g);
        f.u.iter_mut().chain(f.v.iter_mut()).for_each(|x| *x = rng.gen_range(-1.0..1.0));
        f.apply_dirichlet();
        f
    }

    fn random_traj(g: &GridSpec, rng: &mut ChaCha8Rng) -> Trajectory {
        Trajectory {
            grid: *g,
            steps: (0..=g.nt).map(|_| random_field(g, rng)).collect(),
        }
    }

    fn eddy(g: &GridSpec, amp: f64) -> VelocityField {
        stream_velocity(g, |x, y| amp * ((PI * x).sin() * (PI * y).sin()).powi(2))
    }

    #[test]
    fn zero_data_gives_zero_trajectory() {
        let s = solver(12, 8, 0.1);
        let y = s
            .solve_forward(&VelocityField::zeros(s.grid()), &ForcingAssembly::none(), &SolverOptions::default())
            .unwrap();
        assert_eq!(y.max_abs(), 0.0);
    }

    #[test]
    fn unforced_energy_decays() {
        let s = solver(16, 16, 0.05);
        let y0 = eddy(s.grid(), 1.0);
        let y = s.solve_forward(&y0, &ForcingAssembly::none(), &SolverOptions::default()).unwrap();
        for k in 0..y.nt() {
            assert!(y.steps[k + 1].norm() < y.steps[k].norm());
            assert!(divergence(&y.steps[k + 1]).max_abs() < 1e-10);
        }
    }

    #[test]
    fn forward_backward_duality_with_link() {
        let s = solver(12, 10, 0.1);
        let g = *s.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let y0 = project_div_free(&random_field(&g, &mut rng)).unwrap();
        let f = random_traj(&g, &mut rng);
        let e = random_traj(&g, &mut rng);
        let src = random_traj(&g, &mut rng);
        let link = random_traj(&g, &mut rng).scaled(0.1);
        let phi_t = project_div_free(&random_field(&g, &mut rng)).unwrap();

        let y = s.forward_sweep(&y0, Some(&f), Some(&e), false, Some(&link)).unwrap();
        let rho = s.backward_sweep(&phi_t, Some(&src), None, Some(&link)).unwrap();
        let rep = forcing_representer(&rho);

        let mut lhs = phi_t.dot(y.terminal());
        for k in 0..=g.nt {
            lhs += g.time_weight(k) * src.steps[k].dot(&y.steps[k]);
        }
        let mut rhs = rho.steps[0].dot(&y0) + g.time_weight(0) * src.steps[0].dot(&y0);
        rhs -= g.dt() * rho.steps[0].dot(&s.stencil().linearized(&link.steps[0], &y0));
        for k in 0..=g.nt {
            rhs += g.time_weight(k) * f.steps[k].dot(&rep.steps[k]);
        }
        for k in 0..g.nt {
            rhs += g.dt() * rho.steps[k].dot(&e.steps[k]);
        }
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn decoupled_adjoint_is_time_reversed_stokes() {
        let s = solver(12, 12, 0.05);
        let g = *s.grid();
        let phi_t = eddy(&g, 1.0);
        let p = RobustParams::new(10.0, 10.0, 0.0).unwrap();
        let adj = s
            .solve_backward_adjoint(&phi_t, None, None, None, &p, &SolverOptions::default())
            .unwrap();
        let fwd = s.solve_forward(&phi_t, &ForcingAssembly::none(), &SolverOptions::default()).unwrap();
        for k in 0..=g.nt {
            let d = adj.phi_state.steps[g.nt - k].sub(&fwd.steps[k]).max_abs();
            assert!(d < 1e-13, "step {k}: {d}");
        }
        assert!(adj.iterations <= 2);
    }

    #[test]
    fn coupled_linear_decouples_when_mu_is_zero() {
        let s = solver(12, 10, 0.1);
        let g = *s.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_traj(&g, &mut rng);
        let y0 = VelocityField::zeros(&g);
        let p = RobustParams::new(10.0, 10.0, 0.0).unwrap();
        let sol = s
            .solve_coupled_linear(&CoupledData::new(&y0).with_h(&h), &p, &SolverOptions::default(), None)
            .unwrap();
        assert_eq!(sol.z.max_abs(), 0.0);
        let plain = s.solve_forward(&y0, &ForcingAssembly::leader(h), &SolverOptions::default()).unwrap();
        assert!(sol.y.sub(&plain).max_abs() < 1e-14 * plain.max_abs().max(1.0));
    }

    #[test]
    fn coupled_linear_fixed_point_is_independent_of_start() {
        let s = solver(12, 12, 0.1);
        let g = *s.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = random_traj(&g, &mut rng).scaled(0.1);
        let yd = random_traj(&g, &mut rng).scaled(0.1);
        let y0 = eddy(&g, 0.1);
        let p = RobustParams::default();
        let data = CoupledData::new(&y0).with_h(&h).with_yd(&yd);
        let opts = SolverOptions::default();
        let a = s.solve_coupled_linear(&data, &p, &opts, None).unwrap();
        let start = random_traj(&g, &mut rng).scaled(5.0);
        let b = s.solve_coupled_linear(&data, &p, &opts, Some(&start)).unwrap();
        assert!(a.z.norm() > 0.0);
        assert!(a.z.sub(&b.z).norm() <= 1e-8 * a.z.norm());
        assert!(a.y.sub(&b.y).norm() <= 1e-8 * a.y.norm());
        assert_eq!(a.z_state.terminal().max_abs(), 0.0);
    }

    #[test]
    fn nonlinear_matches_navier_stokes_forward_without_tracking() {
        let s = solver(12, 12, 0.05);
        let g = *s.grid();
        let y0 = eddy(&g, 0.5);
        let p = RobustParams::new(10.0, 10.0, 0.0).unwrap();
        let opts = SolverOptions::default();
        let sol = s.solve_coupled_nonlinear(&CoupledData::new(&y0), &p, &opts, None).unwrap();
        let ns = s.solve_forward(&y0, &ForcingAssembly::none(), &opts.navier_stokes()).unwrap();
        assert!(sol.y.sub(&ns).max_abs() < 1e-14);
        assert!(sol.y.terminal().norm() < y0.norm());
    }

    #[test]
    fn cfl_violation_is_reported() {
        let s = solver(16, 8, 1.0);
        let y0 = eddy(s.grid(), 200.0);
        let err = s
            .solve_forward(&y0, &ForcingAssembly::none(), &SolverOptions::default().navier_stokes())
            .unwrap_err();
        assert!(matches!(err, Error::Cfl { .. }), "{err}");
    }
}

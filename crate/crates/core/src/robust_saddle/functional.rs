use serde::{Deserialize, Serialize};

use super::params::RobustParams;
use crate::error::Result;
use crate::grid_fields::{SpaceWeight, Trajectory, VelocityField};
use crate::stokes_core::{forcing_representer, FlowSolver, ForcingAssembly, SolverOptions};

/// Fixed data of one robust control problem: leader control, initial state
/// and tracking target on a solver's grid and geometry.
#[derive(Debug, Clone, Copy)]
pub struct SaddleProblem<'a> {
    pub solver: &'a FlowSolver,
    pub h: Option<&'a Trajectory>,
    pub y0: &'a VelocityField,
    pub yd: Option<&'a Trajectory>,
    pub params: RobustParams,
    pub opts: SolverOptions,
}

/// Value of the robust functional split into its three addends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JrTerms {
    pub tracking: f64,
    pub follower: f64,
    pub disturbance: f64,
}

impl JrTerms {
    pub fn value(&self) -> f64 {
        self.tracking + self.follower - self.disturbance
    }
}

impl<'a> SaddleProblem<'a> {
    pub fn new(
        solver: &'a FlowSolver,
        y0: &'a VelocityField,
        params: RobustParams,
        opts: SolverOptions,
    ) -> Self {
        SaddleProblem {
            solver,
            h: None,
            y0,
            yd: None,
            params,
            opts,
        }
    }

    pub fn with_h(self, h: Option<&'a Trajectory>) -> Self {
        SaddleProblem { h, ..self }
    }

    pub fn with_yd(self, yd: Option<&'a Trajectory>) -> Self {
        SaddleProblem { yd, ..self }
    }

    pub fn with_params(self, params: RobustParams) -> Self {
        SaddleProblem { params, ..self }
    }

    /// State driven by leader `h`, follower `v` (through the cutoff) and disturbance `psi`.
    pub fn state(&self, psi: &Trajectory, v: &Trajectory) -> Result<Trajectory> {
        let forcing = ForcingAssembly {
            leader: self.h.cloned(),
            follower: Some(v.clone()),
            disturbance: Some(psi.clone()),
            extra_source: None,
        };
        self.solver.solve_forward(self.y0, &forcing, &self.opts)
    }

    fn misfit(&self, y: &Trajectory) -> Trajectory {
        match self.yd {
            Some(yd) => y.sub(yd),
            None => y.clone(),
        }
    }

    pub fn jr_terms(&self, psi: &Trajectory, v: &Trajectory) -> Result<JrTerms> {
        let y = self.state(psi, v)?;
        Ok(self.jr_terms_with_state(psi, v, &y))
    }

    fn jr_terms_with_state(&self, psi: &Trajectory, v: &Trajectory, y: &Trajectory) -> JrTerms {
        let geom = self.solver.geometry();
        let e = self.misfit(y);
        let p = &self.params;
        JrTerms {
            tracking: 0.5 * p.mu * e.inner(&e, SpaceWeight::Faces(&geom.observed_mask)),
            follower: 0.5 * p.ell2() * v.inner(v, SpaceWeight::Faces(&geom.chi)),
            disturbance: 0.5 * p.gamma2() * psi.inner(psi, SpaceWeight::Uniform),
        }
    }

    /// `mu/2 |y - yd|^2_{O_d} + 1/2 (ell^2 |chi^{1/2} v|^2 - gamma^2 |psi|^2)`.
    pub fn eval_jr(&self, psi: &Trajectory, v: &Trajectory) -> Result<f64> {
        Ok(self.jr_terms(psi, v)?.value())
    }

    /// Adjoint of the tracking term: `z` in forcing form.
    pub fn tracking_adjoint(&self, y: &Trajectory) -> Result<Trajectory> {
        let geom = self.solver.geometry();
        let mut s = self.misfit(y).hadamard(&geom.observed_mask);
        s.scale(self.params.mu);
        let link = if self.opts.convection_on { Some(y) } else { None };
        let zero = VelocityField::zeros(self.solver.grid());
        let rho = self.solver.backward_sweep(&zero, Some(&s), None, link)?;
        Ok(forcing_representer(&rho))
    }

    /// Gradients `(z - gamma^2 psi, chi (ell^2 v + z))` with respect to the
    /// trapezoid space-time inner product.
    pub fn grad_jr(&self, psi: &Trajectory, v: &Trajectory) -> Result<(Trajectory, Trajectory)> {
        let y = self.state(psi, v)?;
        let z = self.tracking_adjoint(&y)?;
        Ok(self.gradients_from_adjoint(psi, v, &z))
    }

    pub(crate) fn gradients_from_adjoint(
        &self,
        psi: &Trajectory,
        v: &Trajectory,
        z: &Trajectory,
    ) -> (Trajectory, Trajectory) {
        let mut g_psi = z.clone();
        g_psi.axpy(-self.params.gamma2(), psi);
        let mut g_v = z.clone();
        g_v.axpy(self.params.ell2(), v);
        let g_v = g_v.hadamard(&self.solver.geometry().chi);
        (g_psi, g_v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_fields::{GridSpec, Region};
    use crate::stokes_core::ControlGeometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn solver(n: usize, nt: usize) -> FlowSolver {
        let g = GridSpec::unit(n, nt, 0.1).unwrap();
        FlowSolver::new(ControlGeometry::default_layout(&g).unwrap()).unwrap()
    }

    fn random_traj(g: &GridSpec, rng: &mut ChaCha8Rng, amp: f64) -> Trajectory {
        let mut steps = Vec::with_capacity(g.nt + 1);
        for _ in 0..=g.nt {
            let mut f = VelocityField::zeros(g);
            f.u.iter_mut().chain(f.v.iter_mut()).for_each(|x| *x = amp * rng.gen_range(-1.0..1.0));
            f.apply_dirichlet();
            steps.push(f);
        }
        Trajectory { grid: *g, steps }
    }

    #[test]
    fn tracking_of_unit_misfit_on_quarter_area() {
        // y = 0 and yd = -1 on all faces, O_d of area 1/4, T = 1
        let g = GridSpec::unit(16, 8, 1.0).unwrap();
        let od = Region::new(0.25, 0.75, 0.25, 0.75).unwrap();
        let base = ControlGeometry::default_layout(&g).unwrap();
        let geom = ControlGeometry::new(&g, base.omega, base.follower, od, base.omega0).unwrap();
        let s = FlowSolver::new(geom).unwrap();
        let y0 = VelocityField::zeros(&g);
        let yd = Trajectory::constant(&g, &VelocityField::from_fn(&g, |_, _| -1.0, |_, _| -1.0));
        let p = SaddleProblem::new(&s, &y0, RobustParams::default(), SolverOptions::default())
            .with_yd(Some(&yd));
        let z = Trajectory::zeros(&g);
        let val = p.eval_jr(&z, &z).unwrap();
        assert!((val - 0.25).abs() < 1e-13, "{val}");
    }

    #[test]
    fn matches_independent_quadrature() {
        let s = solver(16, 10);
        let g = *s.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = random_traj(&g, &mut rng, 0.1);
        let v = random_traj(&g, &mut rng, 0.1);
        let h = random_traj(&g, &mut rng, 0.1);
        let yd = random_traj(&g, &mut rng, 0.1);
        let y0 = VelocityField::zeros(&g);
        let params = RobustParams::new(3.0, 7.0, 2.0).unwrap();
        let p = SaddleProblem::new(&s, &y0, params, SolverOptions::default())
            .with_h(Some(&h))
            .with_yd(Some(&yd));
        let val = p.eval_jr(&psi, &v).unwrap();
        let y = p.state(&psi, &v).unwrap();

        // plain loops over faces and nodes
        let geom = s.geometry();
        let (hx, hy, dt) = (g.hx(), g.hy(), g.dt());
        let face_w = |k: usize, is_u: bool| -> f64 {
            let wall = if is_u {
                let i = k / g.ny;
                i == 0 || i == g.nx
            } else {
                let j = k % (g.ny + 1);
                j == 0 || j == g.ny
            };
            if wall { 0.5 * hx * hy } else { hx * hy }
        };
        let mut acc = 0.0;
        for n in 0..=g.nt {
            let tw = if n == 0 || n == g.nt { 0.5 * dt } else { dt };
            for (is_u, len) in [(true, (g.nx + 1) * g.ny), (false, g.nx * (g.ny + 1))] {
                for k in 0..len {
                    let pick = |t: &Trajectory| if is_u { t.steps[n].u[k] } else { t.steps[n].v[k] };
                    let (md, chi) = if is_u {
                        (geom.observed_mask.u[k], geom.chi.u[k])
                    } else {
                        (geom.observed_mask.v[k], geom.chi.v[k])
                    };
                    let e = pick(&y) - pick(&yd);
                    let term = 0.5 * params.mu * md * e * e + 0.5 * 9.0 * chi * pick(&v).powi(2)
                        - 0.5 * 49.0 * pick(&psi).powi(2);
                    acc += tw * face_w(k, is_u) * term;
                }
            }
        }
        assert!((val - acc).abs() <= 1e-12 * acc.abs(), "{val} vs {acc}");
    }

    #[test]
    fn gradient_matches_central_differences() {
        let s = solver(12, 10);
        let g = *s.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let psi = random_traj(&g, &mut rng, 0.3);
        let v = random_traj(&g, &mut rng, 0.3);
        let h = random_traj(&g, &mut rng, 0.3);
        let yd = random_traj(&g, &mut rng, 0.3);
        let y0 = VelocityField::zeros(&g);
        let params = RobustParams::new(2.0, 3.0, 50.0).unwrap();
        let p = SaddleProblem::new(&s, &y0, params, SolverOptions::default())
            .with_h(Some(&h))
            .with_yd(Some(&yd));
        let (gp, gv) = p.grad_jr(&psi, &v).unwrap();
        for _ in 0..4 {
            let dpsi = random_traj(&g, &mut rng, 1.0);
            let dv = random_traj(&g, &mut rng, 1.0);
            let eps = 1e-4;
            let fd_psi = (p.eval_jr(&psi.add(&dpsi.scaled(eps)), &v).unwrap()
                - p.eval_jr(&psi.sub(&dpsi.scaled(eps)), &v).unwrap())
                / (2.0 * eps);
            let fd_v = (p.eval_jr(&psi, &v.add(&dv.scaled(eps))).unwrap()
                - p.eval_jr(&psi, &v.sub(&dv.scaled(eps))).unwrap())
                / (2.0 * eps);
            let an_psi = gp.inner(&dpsi, SpaceWeight::Uniform);
            let an_v = gv.inner(&dv, SpaceWeight::Uniform);
            assert!((fd_psi - an_psi).abs() <= 1e-7 * an_psi.abs(), "{fd_psi} {an_psi}");
            assert!((fd_v - an_v).abs() <= 1e-7 * an_v.abs(), "{fd_v} {an_v}");
        }
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_fields::{SpaceWeight, Trajectory, VelocityField};
use crate::robust_saddle::RobustParams;
use crate::stokes_core::{CoupledData, FlowSolver, SolverOptions};

/// Terminal penalty `1/(2 eps) |y(T)|^2` and CG controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltyConfig {
    pub epsilon: f64,
    pub cg_tol: f64,
    pub cg_max: usize,
    pub epsilon_schedule: Option<Vec<f64>>,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            epsilon: 1e-4,
            cg_tol: 1e-8,
            cg_max: 400,
            epsilon_schedule: None,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("penalty epsilon must be positive".into()));
        }
        if !(self.cg_tol > 0.0) || self.cg_max == 0 {
            return Err(Error::Config("cg_tol must be positive and cg_max at least 1".into()));
        }
        if let Some(s) = &self.epsilon_schedule {
            if s.is_empty() || s.iter().any(|e| !(*e > 0.0)) || s.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(Error::Config(
                    "epsilon_schedule must be positive and strictly decreasing".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        PenaltyConfig {
            epsilon,
            ..self.clone()
        }
    }
}

/// Summary of one penalty level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRecord {
    pub epsilon: f64,
    pub terminal_norm: f64,
    pub control_norm: f64,
    pub cg_iters: usize,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct LeaderResult {
    pub h: Trajectory,
    pub terminal: VelocityField,
    pub terminal_norm: f64,
    pub control_norm: f64,
    pub cg_iters: usize,
    pub objective: f64,
    /// Objective after each CG iteration (index 0 is `h = 0`).
    pub objective_history: Vec<f64>,
    /// Relative CG residual after each iteration.
    pub residual_history: Vec<f64>,
    pub history: Vec<EpsilonRecord>,
}

/// Leader problem data: the coupled linear system with fixed `y0`, `yd`
/// and optional frozen sources `f1`, `f2`.
#[derive(Debug, Clone, Copy)]
pub struct LeaderProblem<'a> {
    pub solver: &'a FlowSolver,
    pub y0: &'a VelocityField,
    pub yd: Option<&'a Trajectory>,
    pub f1: Option<&'a Trajectory>,
    pub f2: Option<&'a Trajectory>,
    pub params: RobustParams,
    pub opts: SolverOptions,
}

impl<'a> LeaderProblem<'a> {
    pub fn new(solver: &'a FlowSolver, y0: &'a VelocityField, params: RobustParams, opts: SolverOptions) -> Self {
        LeaderProblem {
            solver,
            y0,
            yd: None,
            f1: None,
            f2: None,
            params,
            opts: SolverOptions {
                convection_on: false,
                ..opts
            },
        }
    }

    pub fn with_yd(self, yd: Option<&'a Trajectory>) -> Self {
        LeaderProblem { yd, ..self }
    }

    pub fn with_sources(self, f1: Option<&'a Trajectory>, f2: Option<&'a Trajectory>) -> Self {
        LeaderProblem { f1, f2, ..self }
    }

    fn inner(a: &Trajectory, b: &Trajectory) -> f64 {
        a.inner(b, SpaceWeight::Uniform)
    }

    /// `y(T)` of the coupled linear system driven by `h`.
    pub fn control_to_terminal(&self, h: &Trajectory) -> Result<VelocityField> {
        let data = CoupledData {
            h: Some(h),
            y0: self.y0,
            yd: self.yd,
            f1: self.f1,
            f2: self.f2,
        };
        let sol = self.solver.solve_coupled_linear(&data, &self.params, &self.opts, None)?;
        Ok(sol.y.terminal().clone())
    }

    /// Linear part `Lambda_0 h` (zero initial state, target and sources).
    pub fn lambda0(&self, h: &Trajectory) -> Result<VelocityField> {
        let zero = VelocityField::zeros(self.solver.grid());
        let data = CoupledData::new(&zero).with_h(h);
        let sol = self.solver.solve_coupled_linear(&data, &self.params, &self.opts, None)?;
        Ok(sol.y.terminal().clone())
    }

    /// `Lambda_0^* w = 1_omega phi_w` from the adjoint system with terminal data `w`.
    pub fn lambda0_adjoint(&self, w: &VelocityField) -> Result<Trajectory> {
        let adj = self.solver.solve_backward_adjoint(w, None, None, None, &self.params, &self.opts)?;
        Ok(adj.phi.hadamard(&self.solver.geometry().omega_mask))
    }

    fn restrict(&self, h: &Trajectory) -> Trajectory {
        h.hadamard(&self.solver.geometry().omega_mask)
    }

    /// Gradient `h + 1_omega phi` of `1/2 |h|^2 + 1/(2 eps) |y(T)|^2`.
    pub fn penalized_gradient(&self, h: &Trajectory, cfg: &PenaltyConfig) -> Result<Trajectory> {
        let yt = self.control_to_terminal(h)?;
        let mut g = self.lambda0_adjoint(&yt.scaled(1.0 / cfg.epsilon))?;
        g.axpy(1.0, &self.restrict(h));
        Ok(g)
    }

    pub fn objective(&self, h: &Trajectory, cfg: &PenaltyConfig) -> Result<f64> {
        let yt = self.control_to_terminal(h)?;
        let hr = self.restrict(h);
        Ok(0.5 * Self::inner(&hr, &hr) + 0.5 / cfg.epsilon * yt.dot(&yt))
    }

    /// Minimises the penalised functional by conjugate gradients on
    /// `(I + eps^-1 Lambda_0^* Lambda_0) h = -eps^-1 Lambda_0^* y(T; 0)`.
    /// With an `epsilon_schedule`, each level is solved from a cold start
    /// and the last level is returned.
    pub fn solve_null_control_cg(&self, cfg: &PenaltyConfig) -> Result<LeaderResult> {
        cfg.validate()?;
        let levels = cfg.epsilon_schedule.clone().unwrap_or_else(|| vec![cfg.epsilon]);
        let mut history = Vec::with_capacity(levels.len());
        let mut last = None;
        for eps in levels {
            let mut r = self.cg_level(eps, cfg)?;
            history.push(EpsilonRecord {
                epsilon: eps,
                terminal_norm: r.terminal_norm,
                control_norm: r.control_norm,
                cg_iters: r.cg_iters,
                objective: r.objective,
            });
            r.history = history.clone();
            last = Some(r);
        }
        Ok(last.expect("at least one penalty level"))
    }

    fn cg_level(&self, eps: f64, cfg: &PenaltyConfig) -> Result<LeaderResult> {
        let g = *self.solver.grid();
        let c = self.control_to_terminal(&Trajectory::zeros(&g))?;
        let mut b = self.lambda0_adjoint(&c)?;
        b.scale(-1.0 / eps);
        let bnorm = Self::inner(&b, &b).sqrt();

        let mut h = Trajectory::zeros(&g);
        let mut yt = c.clone();
        let objective = |h: &Trajectory, yt: &VelocityField| 0.5 * Self::inner(h, h) + 0.5 / eps * yt.dot(yt);
        let mut objective_history = vec![objective(&h, &yt)];
        let mut residual_history = vec![1.0];
        let mut iters = 0;

        if bnorm > 0.0 {
            let mut r = b.clone();
            let mut p = r.clone();
            let mut rr = Self::inner(&r, &r);
            loop {
                if iters >= cfg.cg_max {
                    return Err(Error::CgStagnation {
                        iterations: iters,
                        residuals: residual_history,
                    });
                }
                iters += 1;
                let lp = self.lambda0(&p)?;
                let mut mp = self.lambda0_adjoint(&lp)?;
                mp.scale(1.0 / eps);
                mp.axpy(1.0, &p);
                let pmp = Self::inner(&p, &mp);
                if !(pmp > 0.0) {
                    return Err(Error::CgStagnation {
                        iterations: iters,
                        residuals: residual_history,
                    });
                }
                let alpha = rr / pmp;
                h.axpy(alpha, &p);
                yt.axpy(alpha, &lp);
                r.axpy(-alpha, &mp);
                let rr_new = Self::inner(&r, &r);
                objective_history.push(objective(&h, &yt));
                let rel = rr_new.sqrt() / bnorm;
                residual_history.push(rel);
                if rel <= cfg.cg_tol {
                    break;
                }
                let beta = rr_new / rr;
                rr = rr_new;
                let mut np = r.clone();
                np.axpy(beta, &p);
                p = np;
            }
        }
        // exact zero outside the leader region
        let h = self.restrict(&h);
        let terminal = self.control_to_terminal(&h)?;
        let terminal_norm = terminal.norm();
        let control_norm = Self::inner(&h, &h).sqrt();
        Ok(LeaderResult {
            objective: 0.5 * control_norm * control_norm + 0.5 / eps * terminal_norm * terminal_norm,
            h,
            terminal,
            terminal_norm,
            control_norm,
            cg_iters: iters,
            objective_history,
            residual_history,
            history: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_fields::{stream_velocity, GridSpec};
    use crate::stokes_core::ControlGeometry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn solver(n: usize, nt: usize, side: f64, horizon: f64) -> FlowSolver {
        let g = GridSpec::new(n, n, side, side, nt, horizon).unwrap();
        FlowSolver::new(ControlGeometry::default_layout(&g).unwrap()).unwrap()
    }

    fn eddy(g: &GridSpec, amp: f64) -> VelocityField {
        let (lx, ly) = (g.lx, g.ly);
        stream_velocity(g, |x, y| amp * ((PI * x / lx).sin() * (PI * y / ly).sin()).powi(2))
    }

    fn rel(a: &VelocityField, b: &VelocityField) -> f64 {
        a.sub(b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn zero_data_gives_zero_everything() {
        let s = solver(8, 8, 1.0, 0.1);
        let g = *s.grid();
        let y0 = VelocityField::zeros(&g);
        let p = LeaderProblem::new(&s, &y0, RobustParams::default(), SolverOptions::default());
        let zero = Trajectory::zeros(&g);
        assert_eq!(p.control_to_terminal(&zero).unwrap().max_abs(), 0.0);
        let cfg = PenaltyConfig::default();
        assert_eq!(p.penalized_gradient(&zero, &cfg).unwrap().max_abs(), 0.0);
        let r = p.solve_null_control_cg(&cfg).unwrap();
        assert_eq!(r.h.max_abs(), 0.0);
        assert_eq!(r.terminal_norm, 0.0);
        assert_eq!(r.cg_iters, 0);
    }

    #[test]
    fn terminal_map_is_affine() {
        let s = solver(8, 8, 1.0, 0.1);
        let g = *s.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let y0 = VelocityField::random(&g, &mut rng, 1.0);
        let p = LeaderProblem::new(&s, &y0, RobustParams::default(), SolverOptions::default());
        let h1 = Trajectory::random(&g, &mut rng, 1.0);
        let h2 = Trajectory::random(&g, &mut rng, 1.0);
        let c = p.control_to_terminal(&Trajectory::zeros(&g)).unwrap();
        let lhs = p.control_to_terminal(&h1.add(&h2)).unwrap().sub(&c);
        let a = p.control_to_terminal(&h1).unwrap().sub(&c);
        let b = p.control_to_terminal(&h2).unwrap().sub(&c);
        assert!(rel(&lhs, &a.add(&b)) < 1e-10);
    }

    #[test]
    fn terminal_map_stable_under_tighter_picard_tolerance() {
        let s = solver(16, 32, 1.0, 0.1);
        let g = *s.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let y0 = eddy(&g, 1.0);
        let h = Trajectory::random(&g, &mut rng, 1.0);
        let opts = SolverOptions::default();
        let tight = SolverOptions {
            picard_tol: 0.5 * opts.picard_tol,
            ..opts
        };
        let a = LeaderProblem::new(&s, &y0, RobustParams::default(), opts);
        let b = LeaderProblem::new(&s, &y0, RobustParams::default(), tight);
        let ya = a.control_to_terminal(&h).unwrap();
        let yb = b.control_to_terminal(&h).unwrap();
        assert!(rel(&ya, &yb) < 1e-7);
    }

    #[test]
    fn lambda_duality() {
        let s = solver(8, 8, 1.0, 0.1);
        let g = *s.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let y0 = VelocityField::zeros(&g);
        let p = LeaderProblem::new(&s, &y0, RobustParams::default(), SolverOptions::default());
        for _ in 0..3 {
            let h = Trajectory::random(&g, &mut rng, 1.0);
            let w = VelocityField::random(&g, &mut rng, 1.0);
            let lhs = p.lambda0(&h).unwrap().dot(&w);
            let rhs = h.inner(&p.lambda0_adjoint(&w).unwrap(), SpaceWeight::Uniform);
            assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(rhs.abs()), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn penalized_gradient_matches_central_differences() {
        let s = solver(8, 8, 1.0, 0.1);
        let g = *s.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let y0 = eddy(&g, 1.0);
        let p = LeaderProblem::new(&s, &y0, RobustParams::default(), SolverOptions::default());
        let cfg = PenaltyConfig::default().with_epsilon(1e-2);
        let h = Trajectory::random(&g, &mut rng, 1.0);
        let grad = p.penalized_gradient(&h, &cfg).unwrap();
        for _ in 0..3 {
            let d = Trajectory::random(&g, &mut rng, 1.0);
            let step = 1e-3;
            let fp = p.objective(&h.add(&d.scaled(step)), &cfg).unwrap();
            let fm = p.objective(&h.sub(&d.scaled(step)), &cfg).unwrap();
            let fd = (fp - fm) / (2.0 * step);
            let an = grad.inner(&d, SpaceWeight::Uniform);
            assert!((fd - an).abs() <= 1e-5 * an.abs(), "{fd} vs {an}");
        }
    }

    #[test]
    fn huge_epsilon_leaves_only_the_control_term() {
        let s = solver(8, 8, 1.0, 0.1);
        let g = *s.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let y0 = eddy(&g, 1.0);
        let p = LeaderProblem::new(&s, &y0, RobustParams::default(), SolverOptions::default());
        let h = Trajectory::random(&g, &mut rng, 1.0).hadamard(&s.geometry().omega_mask);
        let grad = p.penalized_gradient(&h, &PenaltyConfig::default().with_epsilon(1e12)).unwrap();
        assert!(grad.sub(&h).norm() <= 1e-9 * h.norm());
    }

    #[test]
    fn cg_run_is_monotone_supported_optimal_and_consistent() {
        let s = solver(12, 16, 1.0, 0.1);
        let g = *s.grid();
        let y0 = eddy(&g, 1.0);
        let p = LeaderProblem::new(&s, &y0, RobustParams::default(), SolverOptions::default());
        let cfg = PenaltyConfig::default().with_epsilon(1e-4);
        let r = p.solve_null_control_cg(&cfg).unwrap();

        for w in r.objective_history.windows(2) {
            assert!(w[1] <= w[0], "objective increased: {} -> {}", w[0], w[1]);
        }

        let mask = &s.geometry().omega_mask;
        for step in &r.h.steps {
            for (x, m) in step.u.iter().chain(&step.v).zip(mask.u.iter().chain(&mask.v)) {
                if *m == 0.0 {
                    assert_eq!(*x, 0.0);
                }
            }
        }

        let g0 = p.penalized_gradient(&Trajectory::zeros(&g), &cfg).unwrap().norm();
        let gs = p.penalized_gradient(&r.h, &cfg).unwrap().norm();
        assert!(gs <= cfg.cg_tol * g0, "{gs} vs {g0}");

        let hn = r.h.norm();
        let recomputed = 0.5 * hn * hn + 0.5 / cfg.epsilon * r.terminal.dot(&r.terminal);
        assert!((recomputed - r.objective).abs() <= 1e-10 * r.objective);
        assert!((r.terminal.norm() - r.terminal_norm).abs() <= 1e-12 * r.terminal_norm);
    }

    // The default layout on a square of side 20 (equivalently viscosity 1/400
    // on the unit square) puts the spectrum of the control map above 1e-4.
    #[test]
    fn small_eddy_is_driven_close_to_rest() {
        let s = solver(16, 32, 20.0, 20.0);
        let g = *s.grid();
        let y0 = eddy(&g, 1e-3);
        let p = LeaderProblem::new(&s, &y0, RobustParams::default(), SolverOptions::default());
        let uncontrolled = p.control_to_terminal(&Trajectory::zeros(&g)).unwrap().norm();
        let r = p.solve_null_control_cg(&PenaltyConfig::default().with_epsilon(1e-4)).unwrap();
        assert!(r.terminal_norm <= 0.05 * uncontrolled, "{} vs {uncontrolled}", r.terminal_norm);
    }

    #[test]
    fn schedule_must_decrease() {
        let cfg = PenaltyConfig {
            epsilon_schedule: Some(vec![1e-2, 1e-2]),
            ..Default::default()
        };
        assert!(cfg.validate().unwrap_err().is_config());
        assert!(PenaltyConfig::default().with_epsilon(0.0).validate().is_err());
    }
}

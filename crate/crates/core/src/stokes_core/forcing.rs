use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_fields::{GridSpec, Region, SmoothCutoff, Trajectory, VelocityField};
use crate::robust_saddle::RobustParams;

/// Control regions and their face weights on one grid.
#[derive(Debug, Clone)]
pub struct ControlGeometry {
    pub grid: GridSpec,
    /// Leader region.
    pub omega: Region,
    /// Follower region.
    pub follower: SmoothCutoff,
    /// Tracking region.
    pub observed: Region,
    /// Observation set for the weight function.
    pub omega0: Region,
    pub omega_mask: VelocityField,
    pub follower_indicator: VelocityField,
    pub chi: VelocityField,
    pub observed_mask: VelocityField,
}

impl ControlGeometry {
    pub fn new(
        grid: &GridSpec,
        omega: Region,
        follower: SmoothCutoff,
        observed: Region,
        omega0: Region,
    ) -> Result<Self> {
        for (name, r) in [
            ("omega", &omega),
            ("O", &follower.region),
            ("O_d", &observed),
            ("omega_0", &omega0),
        ] {
            r.validate()?;
            if !r.within(grid.lx, grid.ly) {
                return Err(Error::Geometry(format!("region {name} leaves the domain")));
            }
        }
        Ok(ControlGeometry {
            grid: *grid,
            omega_mask: omega.face_mask(grid),
            follower_indicator: follower.region.face_mask(grid),
            chi: follower.face_weights(grid),
            observed_mask: observed.face_mask(grid),
            omega,
            follower,
            observed,
            omega0,
        })
    }

    /// Default layout, given as fractions of the domain lengths.
    pub fn default_layout(grid: &GridSpec) -> Result<Self> {
        let (lx, ly) = (grid.lx, grid.ly);
        let rect = |a: f64, b: f64, c: f64, d: f64| Region::new(a * lx, b * lx, c * ly, d * ly);
        let omega = rect(0.35, 0.75, 0.35, 0.75)?;
        let o = rect(0.05, 0.25, 0.05, 0.25)?;
        let od = rect(0.45, 0.95, 0.45, 0.95)?;
        let omega0 = rect(0.47, 0.7, 0.47, 0.7)?;
        let taper = (4.0 * grid.hx().max(grid.hy())).min(0.45 * (o.x1 - o.x0).min(o.y1 - o.y0));
        Self::new(grid, omega, SmoothCutoff::new(o, taper)?, od, omega0)
    }

    /// Face weight `gamma^-2 - ell^-2 chi` multiplying the follower-side
    /// adjoint in the state equation.
    pub fn coupling(&self, params: &RobustParams) -> VelocityField {
        let (ig, il) = (params.inv_gamma2(), params.inv_ell2());
        let mut k = self.chi.map(|c| ig - il * c);
        k.apply_dirichlet();
        k
    }
}

/// Forcing channels of the state equation.
///
/// `leader` is masked by the leader region and `follower` by the cutoff when
/// assembled; `disturbance` acts globally. `extra` is an explicit per-step
/// source.
#[derive(Debug, Clone, Default)]
pub struct ForcingAssembly {
    pub leader: Option<Trajectory>,
    pub follower: Option<Trajectory>,
    pub disturbance: Option<Trajectory>,
    pub extra_source: Option<Trajectory>,
}

impl ForcingAssembly {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn leader(h: Trajectory) -> Self {
        ForcingAssembly {
            leader: Some(h),
            ..Self::default()
        }
    }

    /// Sum of the nodal channels with masks applied, or `None` if all are absent.
    pub fn nodal(&self, geom: &ControlGeometry) -> Result<Option<Trajectory>> {
        let mut total: Option<Trajectory> = None;
        let mut push = |t: Trajectory| match total.as_mut() {
            Some(acc) => acc.axpy(1.0, &t),
            None => total = Some(t),
        };
        if let Some(h) = &self.leader {
            h.check_grid(&geom.grid)?;
            push(h.hadamard(&geom.omega_mask));
        }
        if let Some(v) = &self.follower {
            v.check_grid(&geom.grid)?;
            push(v.hadamard(&geom.chi));
        }
        if let Some(p) = &self.disturbance {
            p.check_grid(&geom.grid)?;
            push(p.clone());
        }
        Ok(total)
    }
}

/// Time-stepping and fixed-point controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub convection_on: bool,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub relax: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            convection_on: false,
            picard_tol: 1e-12,
            picard_max: 200,
            relax: 1.0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.picard_tol > 0.0) {
            return Err(Error::Config("picard_tol must be positive".into()));
        }
        if !(self.relax > 0.0 && self.relax <= 1.0) {
            return Err(Error::Config(format!("relax must lie in (0, 1] (got {})", self.relax)));
        }
        if self.picard_max == 0 {
            return Err(Error::Config("picard_max must be at least 1".into()));
        }
        Ok(())
    }

    pub fn navier_stokes(self) -> Self {
        SolverOptions {
            convection_on: true,
            ..self
        }
    }
}

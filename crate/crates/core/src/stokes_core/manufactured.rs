//! Manufactured Stokes solution used for convergence studies.

use std::f64::consts::PI;

use super::forcing::{ControlGeometry, ForcingAssembly, SolverOptions};
use super::solver::FlowSolver;
use crate::error::Result;
use crate::grid_fields::{stream_velocity, GridSpec, Trajectory, VelocityField};

/// Stream function `g(t) sin^2(pi x) sin^2(pi y)` on the unit square with
/// `g(t) = cos(t)`; forcing is `y_t - Lap y` (the pressure is zero).
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedStokes;

impl ManufacturedStokes {
    fn g(t: f64) -> f64 {
        t.cos()
    }

    fn dg(t: f64) -> f64 {
        -t.sin()
    }

    pub fn stream(t: f64, x: f64, y: f64) -> f64 {
        Self::g(t) * ((PI * x).sin() * (PI * y).sin()).powi(2)
    }

    fn u(g: f64, x: f64, y: f64) -> f64 {
        g * PI * (PI * x).sin().powi(2) * (2.0 * PI * y).sin()
    }

    fn v(g: f64, x: f64, y: f64) -> f64 {
        -g * PI * (2.0 * PI * x).sin() * (PI * y).sin().powi(2)
    }

    fn lap_u(g: f64, x: f64, y: f64) -> f64 {
        let p2 = PI * PI;
        g * PI * (2.0 * PI * y).sin() * (2.0 * p2 * (2.0 * PI * x).cos() - 4.0 * p2 * (PI * x).sin().powi(2))
    }

    fn lap_v(g: f64, x: f64, y: f64) -> f64 {
        let p2 = PI * PI;
        -g * PI * (2.0 * PI * x).sin() * (2.0 * p2 * (2.0 * PI * y).cos() - 4.0 * p2 * (PI * y).sin().powi(2))
    }

    pub fn velocity(grid: &GridSpec, t: f64) -> VelocityField {
        let g = Self::g(t);
        let mut f = VelocityField::from_fn(grid, |x, y| Self::u(g, x, y), |x, y| Self::v(g, x, y));
        f.apply_dirichlet();
        f
    }

    pub fn forcing(grid: &GridSpec) -> Trajectory {
        Trajectory::from_fn(grid, |t| {
            let (g, dg) = (Self::g(t), Self::dg(t));
            let mut f = VelocityField::from_fn(
                grid,
                |x, y| Self::u(dg, x, y) - Self::lap_u(g, x, y),
                |x, y| Self::v(dg, x, y) - Self::lap_v(g, x, y),
            );
            f.apply_dirichlet();
            f
        })
    }

    /// Discrete L2 error at the final time for an `n x n` grid with `nt` steps.
    pub fn terminal_error(n: usize, nt: usize, horizon: f64) -> Result<f64> {
        let grid = GridSpec::unit(n, nt, horizon)?;
        let solver = FlowSolver::new(ControlGeometry::default_layout(&grid)?)?;
        let y0 = stream_velocity(&grid, |x, y| Self::stream(0.0, x, y));
        let forcing = ForcingAssembly {
            disturbance: Some(Self::forcing(&grid)),
            ..ForcingAssembly::none()
        };
        let y = solver.solve_forward(&y0, &forcing, &SolverOptions::default())?;
        Ok(y.terminal().sub(&Self::velocity(&grid, horizon)).norm())
    }
}

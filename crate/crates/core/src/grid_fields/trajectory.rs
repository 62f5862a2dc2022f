use rand::Rng;
use serde::{Deserialize, Serialize};

use super::field::VelocityField;
use super::grid::GridSpec;
use crate::error::{Error, Result};

/// Velocity samples at the time nodes `t_k = k dt, k = 0..=nt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: GridSpec,
    pub steps: Vec<VelocityField>,
}

/// Spatial weight used inside a space-time inner product.
#[derive(Debug, Clone, Copy)]
pub enum SpaceWeight<'a> {
    Uniform,
    Faces(&'a VelocityField),
}

impl Trajectory {
    pub fn zeros(grid: &GridSpec) -> Self {
        Trajectory {
            grid: *grid,
            steps: vec![VelocityField::zeros(grid); grid.nt + 1],
        }
    }

    /// Same field at every node.
    pub fn constant(grid: &GridSpec, f: &VelocityField) -> Self {
        Trajectory {
            grid: *grid,
            steps: vec![f.clone(); grid.nt + 1],
        }
    }

    /// Samples `f(t)` at each time node.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64) -> VelocityField) -> Self {
        Trajectory {
            grid: *grid,
            steps: (0..=grid.nt).map(|k| f(grid.time(k))).collect(),
        }
    }

    /// Independent [`VelocityField::random`] samples at every time level.
    pub fn random(grid: &GridSpec, rng: &mut impl Rng, amp: f64) -> Self {
        let steps = (0..=grid.nt).map(|_| VelocityField::random(grid, rng, amp)).collect();
        Trajectory { grid: *grid, steps }
    }

    pub fn nt(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn initial(&self) -> &VelocityField {
        &self.steps[0]
    }

    pub fn terminal(&self) -> &VelocityField {
        &self.steps[self.steps.len() - 1]
    }

    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if self.steps.len() != grid.nt + 1
            || !self.grid.same_space(grid)
            || !self.steps.iter().all(|s| s.conforms(grid))
        {
            return Err(Error::Shape(format!(
                "trajectory with {} nodes on {}x{} does not match grid {}x{} with {} steps",
                self.steps.len(),
                self.grid.nx,
                self.grid.ny,
                grid.nx,
                grid.ny,
                grid.nt
            )));
        }
        Ok(())
    }

    pub fn check_same(&self, other: &Self) -> Result<()> {
        other.check_grid(&self.grid)
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (s, xs) in self.steps.iter_mut().zip(&x.steps) {
            s.axpy(a, xs);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn scale(&mut self, a: f64) {
        self.steps.iter_mut().for_each(|s| s.scale(a));
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// Pointwise product with a fixed face weight at every node.
    pub fn hadamard(&self, w: &VelocityField) -> Self {
        Trajectory {
            grid: self.grid,
            steps: self.steps.iter().map(|s| s.hadamard(w)).collect(),
        }
    }

    pub fn inner(&self, other: &Self, weight: SpaceWeight<'_>) -> f64 {
        inner_space_time(self, other, weight)
    }

    pub fn norm(&self) -> f64 {
        self.inner(self, SpaceWeight::Uniform).max(0.0).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.steps.iter().fold(0.0_f64, |m, s| m.max(s.max_abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.steps.iter().all(|s| s.is_finite())
    }
}

/// Trapezoid-in-time, face-weighted-in-space inner product.
pub fn inner_space_time(a: &Trajectory, b: &Trajectory, weight: SpaceWeight<'_>) -> f64 {
    let g = &a.grid;
    let nt = a.steps.len() - 1;
    let dt = g.horizon / nt as f64;
    a.steps
        .iter()
        .zip(&b.steps)
        .enumerate()
        .map(|(k, (x, y))| {
            let wt = if k == 0 || k == nt { 0.5 * dt } else { dt };
            let s = match weight {
                SpaceWeight::Uniform => x.dot(y),
                SpaceWeight::Faces(w) => x.hadamard(w).dot(y),
            };
            wt * s
        })
        .sum()
}

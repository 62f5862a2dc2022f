use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use crate::error::{Error, Result};

/// Staggered (MAC) velocity: `u` on vertical faces `(nx+1) x ny`, `v` on
/// horizontal faces `nx x (ny+1)`, both stored row-major in `(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityField {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Cell-centred scalar, row-major `nx x ny`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub values: Vec<f64>,
}

impl VelocityField {
    pub fn zeros(grid: &GridSpec) -> Self {
        VelocityField {
            nx: grid.nx,
            ny: grid.ny,
            hx: grid.hx(),
            hy: grid.hy(),
            u: vec![0.0; (grid.nx + 1) * grid.ny],
            v: vec![0.0; grid.nx * (grid.ny + 1)],
        }
    }

    pub fn zeros_like(other: &Self) -> Self {
        VelocityField {
            u: vec![0.0; other.u.len()],
            v: vec![0.0; other.v.len()],
            ..*other
        }
    }

    /// Samples `fu` on u-faces and `fv` on v-faces (boundary faces included).
    pub fn from_fn(
        grid: &GridSpec,
        fu: impl Fn(f64, f64) -> f64,
        fv: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut f = Self::zeros(grid);
        let (hx, hy) = (f.hx, f.hy);
        for i in 0..=f.nx {
            for j in 0..f.ny {
                f.u[i * f.ny + j] = fu(i as f64 * hx, (j as f64 + 0.5) * hy);
            }
        }
        for i in 0..f.nx {
            for j in 0..=f.ny {
                f.v[i * (f.ny + 1) + j] = fv((i as f64 + 0.5) * hx, j as f64 * hy);
            }
        }
        f
    }

    /// Uniform random face values in `[-amp, amp)` with zero wall normal velocity.
    pub fn random(grid: &GridSpec, rng: &mut impl Rng, amp: f64) -> Self {
        let mut f = Self::zeros(grid);
        f.u.iter_mut().chain(f.v.iter_mut()).for_each(|x| *x = amp * rng.gen_range(-1.0..1.0));
        f.apply_dirichlet();
        f
    }

    #[inline]
    pub fn ui(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    #[inline]
    pub fn vi(&self, i: usize, j: usize) -> usize {
        i * (self.ny + 1) + j
    }

    #[inline]
    pub fn u_at(&self, i: usize, j: usize) -> f64 {
        self.u[i * self.ny + j]
    }

    #[inline]
    pub fn v_at(&self, i: usize, j: usize) -> f64 {
        self.v[i * (self.ny + 1) + j]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.nx == other.nx && self.ny == other.ny
    }

    pub fn conforms(&self, grid: &GridSpec) -> bool {
        self.nx == grid.nx && self.ny == grid.ny
    }

    pub fn check_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "velocity fields {}x{} and {}x{}",
                self.nx, self.ny, other.nx, other.ny
            )))
        }
    }

    /// Zero the normal velocity on the walls (no-penetration closure).
    pub fn apply_dirichlet(&mut self) {
        let (nx, ny) = (self.nx, self.ny);
        for j in 0..ny {
            self.u[j] = 0.0;
            self.u[nx * ny + j] = 0.0;
        }
        for i in 0..nx {
            self.v[i * (ny + 1)] = 0.0;
            self.v[i * (ny + 1) + ny] = 0.0;
        }
    }

    /// Discrete L2 inner product; wall faces carry half a control volume.
    pub fn dot(&self, other: &Self) -> f64 {
        let (nx, ny) = (self.nx, self.ny);
        let mut s = 0.0;
        for i in 0..=nx {
            let w = if i == 0 || i == nx { 0.5 } else { 1.0 };
            let row = i * ny;
            let mut acc = 0.0;
            for j in 0..ny {
                acc += self.u[row + j] * other.u[row + j];
            }
            s += w * acc;
        }
        for i in 0..nx {
            let row = i * (ny + 1);
            let mut acc = 0.5 * (self.v[row] * other.v[row] + self.v[row + ny] * other.v[row + ny]);
            for j in 1..ny {
                acc += self.v[row + j] * other.v[row + j];
            }
            s += acc;
        }
        s * self.hx * self.hy
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.u
            .iter()
            .chain(self.v.iter())
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }

    pub fn scale(&mut self, a: f64) {
        self.u.iter_mut().chain(self.v.iter_mut()).for_each(|x| *x *= a);
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &Self) {
        debug_assert!(self.same_shape(x));
        for (s, xv) in self.u.iter_mut().zip(&x.u) {
            *s += a * xv;
        }
        for (s, xv) in self.v.iter_mut().zip(&x.v) {
            *s += a * xv;
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

    /// Pointwise product with a face weight field (mask or cutoff).
    pub fn hadamard(&self, weights: &Self) -> Self {
        let mut out = self.clone();
        out.hadamard_assign(weights);
        out
    }

    pub fn hadamard_assign(&mut self, weights: &Self) {
        for (s, w) in self.u.iter_mut().zip(&weights.u) {
            *s *= w;
        }
        for (s, w) in self.v.iter_mut().zip(&weights.v) {
            *s *= w;
        }
    }

    /// Maps every face value through `f`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        VelocityField {
            u: self.u.iter().map(|&x| f(x)).collect(),
            v: self.v.iter().map(|&x| f(x)).collect(),
            ..*self
        }
    }
}

impl ScalarField {
    pub fn zeros(grid: &GridSpec) -> Self {
        ScalarField {
            nx: grid.nx,
            ny: grid.ny,
            hx: grid.hx(),
            hy: grid.hy(),
            values: vec![0.0; grid.nx * grid.ny],
        }
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut s = Self::zeros(grid);
        for i in 0..s.nx {
            for j in 0..s.ny {
                s.values[i * s.ny + j] = f((i as f64 + 0.5) * s.hx, (j as f64 + 0.5) * s.hy);
            }
        }
        s
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ny + j]
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.hx
            * self.hy
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Fix the pressure gauge.
    pub fn remove_mean(&mut self) {
        let m = self.mean();
        self.values.iter_mut().for_each(|x| *x -= m);
    }
}

use serde::{Deserialize, Serialize};

use super::field::VelocityField;
use crate::error::{Error, Result};

/// Space-time discretization of the rectangle `[0, lx] x [0, ly] x [0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub nt: usize,
    pub horizon: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, nt: usize, horizon: f64) -> Result<Self> {
        let g = GridSpec {
            nx,
            ny,
            lx,
            ly,
            nt,
            horizon,
        };
        g.validate()?;
        Ok(g)
    }

    /// Unit square with the given resolution and horizon.
    pub fn unit(n: usize, nt: usize, horizon: f64) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0, nt, horizon)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 8 || self.ny < 8 {
            return Err(Error::Config(format!(
                "grid needs at least 8 cells per direction (got {}x{})",
                self.nx, self.ny
            )));
        }
        if self.nt < 8 {
            return Err(Error::Config(format!(
                "grid needs at least 8 time steps (got {})",
                self.nt
            )));
        }
        for (name, v) in [("lx", self.lx), ("ly", self.ly), ("horizon", self.horizon)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive and finite")));
            }
        }
        Ok(())
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.nt {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    /// Trapezoid weight of time node `k`.
    pub fn time_weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.nt {
            0.5 * self.dt()
        } else {
            self.dt()
        }
    }

    /// Same spatial layout (time resolution may differ).
    pub fn same_space(&self, other: &GridSpec) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.lx == other.lx && self.ly == other.ly
    }

    /// Copy of this grid with a different number of time steps.
    pub fn with_nt(&self, nt: usize) -> Self {
        GridSpec { nt, ..*self }
    }

    /// Copy with the spatial resolution scaled by `factor` in both directions.
    pub fn refined(&self, factor: usize) -> Self {
        GridSpec {
            nx: self.nx * factor,
            ny: self.ny * factor,
            ..*self
        }
    }
}

/// Axis-aligned rectangle inside the domain.
///
/// Membership uses half-open intervals on the sample point, so a rectangle
/// whose edges sit on grid lines has an exact discrete area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

const EDGE_TOL: f64 = 1e-12;

impl Region {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        let r = Region { x0, x1, y0, y1 };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x0 < self.x1 && self.y0 < self.y1) {
            return Err(Error::Geometry(format!(
                "degenerate region [{}, {}] x [{}, {}]",
                self.x0, self.x1, self.y0, self.y1
            )));
        }
        Ok(())
    }

    pub fn within(&self, lx: f64, ly: f64) -> bool {
        self.x0 >= 0.0 && self.y0 >= 0.0 && self.x1 <= lx && self.y1 <= ly
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 - EDGE_TOL
            && x < self.x1 - EDGE_TOL
            && y >= self.y0 - EDGE_TOL
            && y < self.y1 - EDGE_TOL
    }

    /// Strict interior containment of a point, used for critical-point checks.
    pub fn contains_strictly(&self, x: f64, y: f64) -> bool {
        x > self.x0 && x < self.x1 && y > self.y0 && y < self.y1
    }

    pub fn intersection(&self, other: &Region) -> Option<Region> {
        let r = Region {
            x0: self.x0.max(other.x0),
            x1: self.x1.min(other.x1),
            y0: self.y0.max(other.y0),
            y1: self.y1.min(other.y1),
        };
        (r.x0 < r.x1 && r.y0 < r.y1).then_some(r)
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.x0 >= other.x0 && self.x1 <= other.x1 && self.y0 >= other.y0 && self.y1 <= other.y1
    }

    /// 0/1 mask on cell centres, row-major `nx x ny`.
    pub fn cell_mask(&self, grid: &GridSpec) -> Vec<f64> {
        let (hx, hy) = (grid.hx(), grid.hy());
        let mut m = vec![0.0; grid.nx * grid.ny];
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                let (x, y) = ((i as f64 + 0.5) * hx, (j as f64 + 0.5) * hy);
                if self.contains(x, y) {
                    m[i * grid.ny + j] = 1.0;
                }
            }
        }
        m
    }

    /// 0/1 mask on velocity faces.
    pub fn face_mask(&self, grid: &GridSpec) -> VelocityField {
        VelocityField::from_fn(grid, |x, y| if self.contains(x, y) { 1.0 } else { 0.0 }, |x, y| {
            if self.contains(x, y) {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// Smooth non-negative cutoff supported on a region, equal to one on the
/// region shrunk by `taper` and ramping with a half cosine in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothCutoff {
    pub region: Region,
    pub taper: f64,
}

impl SmoothCutoff {
    pub fn new(region: Region, taper: f64) -> Result<Self> {
        region.validate()?;
        if !(taper > 0.0) {
            return Err(Error::Geometry("cutoff taper must be positive".into()));
        }
        if 2.0 * taper > (region.x1 - region.x0).min(region.y1 - region.y0) {
            return Err(Error::Geometry(format!(
                "cutoff taper {taper} leaves no plateau inside the region"
            )));
        }
        Ok(SmoothCutoff { region, taper })
    }

    /// Default taper of four cells of the given grid.
    pub fn with_cells(region: Region, grid: &GridSpec, cells: f64) -> Result<Self> {
        Self::new(region, cells * grid.hx().max(grid.hy()))
    }

    fn ramp(&self, d: f64) -> f64 {
        if d <= 0.0 {
            0.0
        } else if d >= self.taper {
            1.0
        } else {
            0.5 * (1.0 - (std::f64::consts::PI * d / self.taper).cos())
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let r = &self.region;
        let dx = (x - r.x0).min(r.x1 - x);
        let dy = (y - r.y0).min(r.y1 - y);
        self.ramp(dx) * self.ramp(dy)
    }

    pub fn face_weights(&self, grid: &GridSpec) -> VelocityField {
        VelocityField::from_fn(grid, |x, y| self.eval(x, y), |x, y| self.eval(x, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_grids() {
        assert!(GridSpec::new(4, 16, 1.0, 1.0, 16, 1.0).is_err());
        assert!(GridSpec::new(16, 16, 1.0, 1.0, 4, 1.0).is_err());
        assert!(GridSpec::new(16, 16, 1.0, 1.0, 16, 0.0).is_err());
        assert!(GridSpec::new(16, 12, 2.0, 1.0, 16, 1.0).is_ok());
    }

    #[test]
    fn aligned_region_mask_has_exact_area() {
        let g = GridSpec::unit(16, 8, 1.0).unwrap();
        let r = Region::new(0.25, 0.75, 0.25, 0.75).unwrap();
        let area: f64 = r.cell_mask(&g).iter().sum::<f64>() * g.cell_area();
        assert!((area - 0.25).abs() < 1e-14);
    }

    #[test]
    fn cutoff_bounds_and_support() {
        let g = GridSpec::unit(32, 8, 1.0).unwrap();
        let r = Region::new(0.05, 0.45, 0.1, 0.5).unwrap();
        let c = SmoothCutoff::with_cells(r, &g, 4.0).unwrap();
        let w = c.face_weights(&g);
        for val in w.u.iter().chain(w.v.iter()) {
            assert!((0.0..=1.0).contains(val));
        }
        assert_eq!(c.eval(0.6, 0.3), 0.0);
        assert_eq!(c.eval(0.25, 0.3), 1.0);
        // continuity across the ramp
        let mut prev = c.eval(0.05, 0.3);
        let mut x = 0.05;
        while x < 0.25 {
            x += 1e-4;
            let cur = c.eval(x, 0.3);
            assert!((cur - prev).abs() < 1e-2);
            prev = cur;
        }
    }

    #[test]
    fn region_set_relations() {
        let a = Region::new(0.35, 0.75, 0.35, 0.75).unwrap();
        let b = Region::new(0.05, 0.25, 0.05, 0.25).unwrap();
        let c = Region::new(0.45, 0.95, 0.45, 0.95).unwrap();
        assert!(a.intersection(&b).is_none());
        let ac = a.intersection(&c).unwrap();
        assert_eq!(ac, Region::new(0.45, 0.75, 0.45, 0.75).unwrap());
    }
}

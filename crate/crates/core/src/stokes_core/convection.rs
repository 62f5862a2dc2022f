//! Centered advection `(y . grad) y` on the staggered grid.
//!
//! The stencil is stored as a list of bilinear terms `coef * y[a] * y[b]`
//! contributing to face `out`, with wall ghosts folded into the coefficients.
//! The nonlinear term, its Jacobian and the Jacobian transpose all read the
//! same list, so the discrete adjoint is exact.

use crate::grid_fields::VelocityField;

#[derive(Debug, Clone, Copy)]
struct Term {
    coef: f64,
    out: u32,
    a: u32,
    b: u32,
}

#[derive(Debug, Clone)]
pub struct ConvectionStencil {
    nx: usize,
    ny: usize,
    nu: usize,
    terms: Vec<Term>,
}

impl ConvectionStencil {
    pub fn new(nx: usize, ny: usize, hx: f64, hy: f64) -> Self {
        let nu = (nx + 1) * ny;
        let ui = |i: usize, j: usize| (i * ny + j) as u32;
        let vi = |i: usize, j: usize| (nu + i * (ny + 1) + j) as u32;
        let mut terms = Vec::with_capacity(12 * nu);
        let (cx, cy) = (0.5 / hx, 0.5 / hy);

        // u-faces: u du/dx + vbar du/dy
        for i in 1..nx {
            for j in 0..ny {
                let out = ui(i, j);
                if i + 1 < nx {
                    terms.push(Term { coef: cx, out, a: out, b: ui(i + 1, j) });
                }
                if i > 1 {
                    terms.push(Term { coef: -cx, out, a: out, b: ui(i - 1, j) });
                }
                // du/dy with ghost u(i,-1) = -u(i,0), u(i,ny) = -u(i,ny-1)
                let mut dudy: Vec<(f64, u32)> = Vec::with_capacity(3);
                if j + 1 < ny {
                    dudy.push((cy, ui(i, j + 1)));
                } else {
                    dudy.push((-cy, out));
                }
                if j > 0 {
                    dudy.push((-cy, ui(i, j - 1)));
                } else {
                    dudy.push((cy, out));
                }
                for (ci, jj) in [(i - 1, j), (i, j), (i - 1, j + 1), (i, j + 1)] {
                    if jj == 0 || jj == ny {
                        continue;
                    }
                    for &(c, b) in &dudy {
                        terms.push(Term { coef: 0.25 * c, out, a: vi(ci, jj), b });
                    }
                }
            }
        }
        // v-faces: ubar dv/dx + v dv/dy
        for i in 0..nx {
            for j in 1..ny {
                let out = vi(i, j);
                if j + 1 < ny {
                    terms.push(Term { coef: cy, out, a: out, b: vi(i, j + 1) });
                }
                if j > 1 {
                    terms.push(Term { coef: -cy, out, a: out, b: vi(i, j - 1) });
                }
                let mut dvdx: Vec<(f64, u32)> = Vec::with_capacity(3);
                if i + 1 < nx {
                    dvdx.push((cx, vi(i + 1, j)));
                } else {
                    dvdx.push((-cx, out));
                }
                if i > 0 {
                    dvdx.push((-cx, vi(i - 1, j)));
                } else {
                    dvdx.push((cx, out));
                }
                for (ii, cj) in [(i, j - 1), (i + 1, j - 1), (i, j), (i + 1, j)] {
                    if ii == 0 || ii == nx {
                        continue;
                    }
                    for &(c, b) in &dvdx {
                        terms.push(Term { coef: 0.25 * c, out, a: ui(ii, cj), b });
                    }
                }
            }
        }
        ConvectionStencil { nx, ny, nu, terms }
    }

    pub fn for_field(f: &VelocityField) -> Self {
        Self::new(f.nx, f.ny, f.hx, f.hy)
    }

    pub fn matches(&self, f: &VelocityField) -> bool {
        self.nx == f.nx && self.ny == f.ny
    }

    #[inline]
    fn get(&self, f: &VelocityField, k: u32) -> f64 {
        let k = k as usize;
        if k < self.nu {
            f.u[k]
        } else {
            f.v[k - self.nu]
        }
    }

    #[inline]
    fn add(&self, f: &mut VelocityField, k: u32, val: f64) {
        let k = k as usize;
        if k < self.nu {
            f.u[k] += val;
        } else {
            f.v[k - self.nu] += val;
        }
    }

    /// `N(y) = (y . grad) y`, zero on wall faces.
    pub fn apply(&self, y: &VelocityField) -> VelocityField {
        let mut out = VelocityField::zeros_like(y);
        for t in &self.terms {
            let val = t.coef * self.get(y, t.a) * self.get(y, t.b);
            self.add(&mut out, t.out, val);
        }
        out
    }

    /// Jacobian action `N'(y) d = (d . grad) y + (y . grad) d`.
    pub fn linearized(&self, y: &VelocityField, d: &VelocityField) -> VelocityField {
        let mut out = VelocityField::zeros_like(y);
        for t in &self.terms {
            let val = t.coef
                * (self.get(d, t.a) * self.get(y, t.b) + self.get(y, t.a) * self.get(d, t.b));
            self.add(&mut out, t.out, val);
        }
        out
    }

    /// Transposed Jacobian `N'(y)^T z` in the face inner product.
    pub fn linearized_transpose(&self, y: &VelocityField, z: &VelocityField) -> VelocityField {
        let mut out = VelocityField::zeros_like(y);
        for t in &self.terms {
            let zo = t.coef * self.get(z, t.out);
            self.add(&mut out, t.a, zo * self.get(y, t.b));
            self.add(&mut out, t.b, zo * self.get(y, t.a));
        }
        out
    }
}

/// Centered advection term `(y . grad) y` interpolated to faces.
pub fn convection(y: &VelocityField) -> VelocityField {
    ConvectionStencil::for_field(y).apply(y)
}

/// Adjoint coupling term `(z . grad^T) y - (y . grad) z`, realised as the
/// exact transpose of the discrete linearised advection around `y`.
pub fn adjoint_coupling(y: &VelocityField, z: &VelocityField) -> VelocityField {
    ConvectionStencil::for_field(y).linearized_transpose(y, z)
}

use crate::error::Result;
use crate::grid_fields::ops::{curl_nodes, curl_nodes_adjoint, vector_laplacian};
use crate::grid_fields::{GridSpec, VelocityField};
use crate::linalg::BandedCholesky;

/// One implicit Euler Stokes step `b -> y`, where `y` is the divergence-free
/// field minimising `1/2 <(I - dt Lap) y, y> - <b, y>`.
///
/// Divergence-free fields are parametrised by a nodal stream function, so the
/// step reduces to one SPD banded solve with `K = C^T (I - dt Lap) C`. The
/// operator is symmetric in the face inner product.
#[derive(Debug, Clone)]
pub struct StokesStep {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    dt: f64,
    chol: BandedCholesky,
}

const COLORS: usize = 5;

impl StokesStep {
    pub fn new(grid: &GridSpec, dt: f64) -> Result<Self> {
        let (nx, ny, hx, hy) = (grid.nx, grid.ny, grid.hx(), grid.hy());
        let (mx, my) = (nx - 1, ny - 1);
        let nn = mx * my;
        let bw = (2 * my + 2).min(nn - 1);
        let w = bw + 1;
        let mut band = vec![0.0; nn * w];
        let mut psi = vec![0.0; nn];
        for ci in 0..COLORS {
            for cj in 0..COLORS {
                psi.iter_mut().for_each(|x| *x = 0.0);
                for a in (ci..mx).step_by(COLORS) {
                    for b in (cj..my).step_by(COLORS) {
                        psi[a * my + b] = 1.0;
                    }
                }
                let y = curl_nodes(&psi, nx, ny, hx, hy);
                let mut t = vector_laplacian(&y);
                t.scale(-dt);
                t.axpy(1.0, &y);
                let col = curl_nodes_adjoint(&t);
                for a in (ci..mx).step_by(COLORS) {
                    for b in (cj..my).step_by(COLORS) {
                        let n = a * my + b;
                        for ra in a..(a + 3).min(mx) {
                            for rb in b.saturating_sub(2)..(b + 3).min(my) {
                                let m = ra * my + rb;
                                if m >= n && m - n <= bw {
                                    band[m * w + (m - n)] = col[m];
                                }
                            }
                        }
                    }
                }
            }
        }
        let chol = BandedCholesky::factor(nn, bw, band)?;
        Ok(StokesStep {
            nx,
            ny,
            hx,
            hy,
            dt,
            chol,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn apply(&self, b: &VelocityField) -> VelocityField {
        let mut x = curl_nodes_adjoint(b);
        self.chol.solve_in_place(&mut x);
        curl_nodes(&x, self.nx, self.ny, self.hx, self.hy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_fields::{divergence, project_div_free};

    fn rough(g: &GridSpec, a: f64) -> VelocityField {
        let mut f = VelocityField::from_fn(
            g,
            |x, y| (a * x * 7.0).sin() + y * y - x,
            |x, y| (3.0 * x * y + a).cos(),
        );
        f.apply_dirichlet();
        f
    }

    #[test]
    fn step_solves_projected_implicit_euler() {
        let g = GridSpec::new(12, 10, 1.0, 0.7, 8, 1.0).unwrap();
        let dt = 0.01;
        let s = StokesStep::new(&g, dt).unwrap();
        let b = rough(&g, 1.0);
        let y = s.apply(&b);
        assert!(divergence(&y).max_abs() < 1e-11);
        // (I - dt Lap) y - b must be a pure gradient
        let mut r = vector_laplacian(&y);
        r.scale(-dt);
        r.axpy(1.0, &y);
        r.axpy(-1.0, &b);
        let pr = project_div_free(&r).unwrap();
        assert!(pr.norm() < 1e-9 * b.norm(), "residual {}", pr.norm());
    }

    #[test]
    fn step_is_symmetric_contraction() {
        let g = GridSpec::unit(10, 8, 1.0).unwrap();
        let s = StokesStep::new(&g, 0.05).unwrap();
        let a = rough(&g, 0.3);
        let b = rough(&g, 2.1);
        let lhs = s.apply(&a).dot(&b);
        let rhs = a.dot(&s.apply(&b));
        assert!((lhs - rhs).abs() < 1e-13 * lhs.abs().max(1.0));
        let pa = project_div_free(&a).unwrap();
        assert!(s.apply(&pa).norm() < pa.norm());
    }
}

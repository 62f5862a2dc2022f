use super::field::{ScalarField, VelocityField};
use super::ops::{divergence, gradient, scalar_laplacian};
use crate::error::{Error, Result};

const PROJECTION_TOL: f64 = 1e-12;

/// Leray projection: removes the gradient part of `f` after zeroing the wall
/// normal velocity. The Neumann Poisson problem is solved by Jacobi
/// preconditioned CG in the mean-zero subspace.
pub fn project_div_free(f: &VelocityField) -> Result<VelocityField> {
    let mut g = f.clone();
    g.apply_dirichlet();
    let mut rhs = divergence(&g);
    rhs.remove_mean();
    let p = solve_neumann_poisson(&rhs, PROJECTION_TOL)?;
    let gp = gradient(&p);
    g.axpy(-1.0, &gp);
    Ok(g)
}

/// Solves `Lap p = rhs` with homogeneous Neumann data, `mean(p) = 0`.
/// `rhs` must have zero mean.
pub fn solve_neumann_poisson(rhs: &ScalarField, tol: f64) -> Result<ScalarField> {
    let (nx, ny) = (rhs.nx, rhs.ny);
    let (ax, ay) = (1.0 / (rhs.hx * rhs.hx), 1.0 / (rhs.hy * rhs.hy));
    // diagonal of -Lap with Neumann closure
    let diag: Vec<f64> = (0..nx * ny)
        .map(|k| {
            let (i, j) = (k / ny, k % ny);
            let nxn = (i > 0) as u8 as f64 + (i + 1 < nx) as u8 as f64;
            let nyn = (j > 0) as u8 as f64 + (j + 1 < ny) as u8 as f64;
            ax * nxn + ay * nyn
        })
        .collect();
    let neg_lap = |p: &ScalarField| -> ScalarField {
        let mut l = scalar_laplacian(p);
        l.values.iter_mut().for_each(|x| *x = -*x);
        l
    };

    let mut x = ScalarField { values: vec![0.0; nx * ny], ..*rhs };
    let mut r = ScalarField { values: rhs.values.iter().map(|v| -v).collect(), ..*rhs };
    let bnorm = r.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok(x);
    }
    let precond = |r: &ScalarField| -> ScalarField {
        let mut z = r.clone();
        for (zi, d) in z.values.iter_mut().zip(&diag) {
            *zi /= d;
        }
        z.remove_mean();
        z
    };
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz: f64 = r.values.iter().zip(&z.values).map(|(a, b)| a * b).sum();
    let max_iter = 10 * (nx * ny).max(100);
    let mut rel = 1.0;
    for _ in 0..max_iter {
        let ap = neg_lap(&p);
        let pap: f64 = p.values.iter().zip(&ap.values).map(|(a, b)| a * b).sum();
        let alpha = rz / pap;
        for k in 0..nx * ny {
            x.values[k] += alpha * p.values[k];
            r.values[k] -= alpha * ap.values[k];
        }
        rel = r.values.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
        if rel <= tol {
            x.remove_mean();
            return Ok(x);
        }
        z = precond(&r);
        let rz_new: f64 = r.values.iter().zip(&z.values).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..nx * ny {
            p.values[k] = z.values[k] + beta * p.values[k];
        }
    }
    Err(Error::Poisson {
        iterations: max_iter,
        residual: rel,
    })
}

//! Discrete differential operators on the staggered grid.
//!
//! Wall closure: normal velocity is zero on the wall faces and tangential
//! velocity uses a ghost value equal to minus the first interior value, so the
//! vector Laplacian ignores whatever is stored on the wall faces and returns
//! zero there.

use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use super::field::{ScalarField, VelocityField};
use super::grid::GridSpec;

/// Cell divergence.
pub fn divergence(f: &VelocityField) -> ScalarField {
    let (nx, ny) = (f.nx, f.ny);
    let mut out = ScalarField {
        nx,
        ny,
        hx: f.hx,
        hy: f.hy,
        values: vec![0.0; nx * ny],
    };
    for i in 0..nx {
        for j in 0..ny {
            out.values[i * ny + j] = (f.u_at(i + 1, j) - f.u_at(i, j)) / f.hx
                + (f.v_at(i, j + 1) - f.v_at(i, j)) / f.hy;
        }
    }
    out
}

/// Face gradient of a cell scalar; zero on wall faces.
pub fn gradient(p: &ScalarField) -> VelocityField {
    let (nx, ny) = (p.nx, p.ny);
    let mut out = VelocityField {
        nx,
        ny,
        hx: p.hx,
        hy: p.hy,
        u: vec![0.0; (nx + 1) * ny],
        v: vec![0.0; nx * (ny + 1)],
    };
    for i in 1..nx {
        for j in 0..ny {
            out.u[i * ny + j] = (p.at(i, j) - p.at(i - 1, j)) / p.hx;
        }
    }
    for i in 0..nx {
        for j in 1..ny {
            out.v[i * (ny + 1) + j] = (p.at(i, j) - p.at(i, j - 1)) / p.hy;
        }
    }
    out
}

/// Vector Laplacian with no-slip closure.
pub fn vector_laplacian(f: &VelocityField) -> VelocityField {
    let mut out = VelocityField::zeros_like(f);
    vector_laplacian_into(f, &mut out);
    out
}

pub fn vector_laplacian_into(f: &VelocityField, out: &mut VelocityField) {
    let (nx, ny) = (f.nx, f.ny);
    let (ax, ay) = (1.0 / (f.hx * f.hx), 1.0 / (f.hy * f.hy));
    out.u.iter_mut().for_each(|x| *x = 0.0);
    out.v.iter_mut().for_each(|x| *x = 0.0);
    for i in 1..nx {
        for j in 0..ny {
            let c = f.u_at(i, j);
            let w = if i > 1 { f.u_at(i - 1, j) } else { 0.0 };
            let e = if i + 1 < nx { f.u_at(i + 1, j) } else { 0.0 };
            let s = if j > 0 { f.u_at(i, j - 1) } else { -c };
            let n = if j + 1 < ny { f.u_at(i, j + 1) } else { -c };
            out.u[i * ny + j] = ax * (e - 2.0 * c + w) + ay * (n - 2.0 * c + s);
        }
    }
    for i in 0..nx {
        for j in 1..ny {
            let c = f.v_at(i, j);
            let s = if j > 1 { f.v_at(i, j - 1) } else { 0.0 };
            let n = if j + 1 < ny { f.v_at(i, j + 1) } else { 0.0 };
            let w = if i > 0 { f.v_at(i - 1, j) } else { -c };
            let e = if i + 1 < nx { f.v_at(i + 1, j) } else { -c };
            out.v[i * (ny + 1) + j] = ax * (e - 2.0 * c + w) + ay * (n - 2.0 * c + s);
        }
    }
}

/// Cell Laplacian `div(grad p)` with homogeneous Neumann closure.
pub fn scalar_laplacian(p: &ScalarField) -> ScalarField {
    divergence(&gradient(p))
}

/// Discrete H1 seminorm squared of a velocity (sum of squared face
/// differences, wall ghosts included), i.e. `<-Lap f, f>`.
pub fn h1_seminorm_sq(f: &VelocityField) -> f64 {
    -vector_laplacian(f).dot(f)
}

/// Velocity from a stream function given at interior nodes
/// `(i, j), 1 <= i < nx, 1 <= j < ny`, stored row-major `(nx-1) x (ny-1)`.
/// Wall nodes carry zero, so the result is exactly divergence free with
/// vanishing wall normal velocity.
pub fn curl_nodes(psi: &[f64], nx: usize, ny: usize, hx: f64, hy: f64) -> VelocityField {
    let node = |i: usize, j: usize| -> f64 {
        if i == 0 || j == 0 || i >= nx || j >= ny {
            0.0
        } else {
            psi[(i - 1) * (ny - 1) + (j - 1)]
        }
    };
    let mut out = VelocityField {
        nx,
        ny,
        hx,
        hy,
        u: vec![0.0; (nx + 1) * ny],
        v: vec![0.0; nx * (ny + 1)],
    };
    for i in 1..nx {
        for j in 0..ny {
            out.u[i * ny + j] = (node(i, j + 1) - node(i, j)) / hy;
        }
    }
    for i in 0..nx {
        for j in 1..ny {
            out.v[i * (ny + 1) + j] = -(node(i + 1, j) - node(i, j)) / hx;
        }
    }
    out
}

/// Discretely divergence-free velocity of a stream function sampled at the
/// interior grid nodes (the stream function should vanish on the walls).
pub fn stream_velocity(grid: &GridSpec, psi: impl Fn(f64, f64) -> f64) -> VelocityField {
    let (nx, ny, hx, hy) = (grid.nx, grid.ny, grid.hx(), grid.hy());
    let mut nodes = vec![0.0; (nx - 1) * (ny - 1)];
    for i in 1..nx {
        for j in 1..ny {
            nodes[(i - 1) * (ny - 1) + (j - 1)] = psi(i as f64 * hx, j as f64 * hy);
        }
    }
    curl_nodes(&nodes, nx, ny, hx, hy)
}

/// Smooth random divergence-free field: the curl of
/// `sum c_pq / (p^2 + q^2) sin(p pi x / lx) sin(q pi y / ly)` over
/// `1 <= p, q <= modes` with standard normal `c_pq`.
pub fn random_stream_velocity(grid: &GridSpec, rng: &mut impl Rng, modes: usize) -> VelocityField {
    let coeffs: Vec<f64> = (0..modes * modes).map(|_| rng.sample(StandardNormal)).collect();
    let (kx, ky) = (PI / grid.lx, PI / grid.ly);
    stream_velocity(grid, |x, y| {
        let mut s = 0.0;
        for p in 1..=modes {
            for q in 1..=modes {
                let c = coeffs[(p - 1) * modes + (q - 1)] / (p * p + q * q) as f64;
                s += c * (p as f64 * kx * x).sin() * (q as f64 * ky * y).sin();
            }
        }
        s
    })
}

/// Transpose of [`curl_nodes`] with respect to the weighted face inner
/// product and the Euclidean inner product on nodes.
pub fn curl_nodes_adjoint(f: &VelocityField) -> Vec<f64> {
    let (nx, ny) = (f.nx, f.ny);
    let w = f.hx * f.hy;
    let mut out = vec![0.0; (nx - 1) * (ny - 1)];
    for i in 1..nx {
        for j in 1..ny {
            let du = (f.u_at(i, j - 1) - f.u_at(i, j)) / f.hy;
            let dv = (f.v_at(i, j) - f.v_at(i - 1, j)) / f.hx;
            out[(i - 1) * (ny - 1) + (j - 1)] = w * (du + dv);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> GridSpec {
        GridSpec::unit(n, 8, 1.0).unwrap()
    }

    #[test]
    fn gradient_is_minus_divergence_transpose() {
        let g = grid(12);
        let p = ScalarField::from_fn(&g, |x, y| (3.0 * x).sin() + x * y * y);
        let mut f = VelocityField::from_fn(&g, |x, y| x * x - y, |x, y| (x + 2.0 * y).cos());
        f.apply_dirichlet();
        let lhs = gradient(&p).dot(&f);
        let rhs = -p.dot(&divergence(&f));
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn vector_laplacian_symmetric_negative() {
        let g = grid(10);
        let mut a = VelocityField::from_fn(&g, |x, y| (x * 7.0).sin() * y, |x, y| x * (y * 5.0).cos());
        let mut b = VelocityField::from_fn(&g, |x, y| x * y * (1.0 - y), |x, y| (x - y).exp());
        a.apply_dirichlet();
        b.apply_dirichlet();
        let ab = vector_laplacian(&a).dot(&b);
        let ba = vector_laplacian(&b).dot(&a);
        assert!((ab - ba).abs() < 1e-11 * ab.abs().max(1.0));
        assert!(h1_seminorm_sq(&a) > 0.0);
    }

    #[test]
    fn laplacian_second_order_on_smooth_field() {
        // u = sin(pi x) sin(pi y)^2 style fields vanish on walls; compare against analytic Laplacian
        let err = |n: usize| {
            let g = grid(n);
            let fu = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin().powi(2);
            let lap = |x: f64, y: f64| {
                let sx = (PI * x).sin();
                -PI * PI * sx * (PI * y).sin().powi(2) + sx * 2.0 * PI * PI * (2.0 * PI * y).cos()
            };
            let f = VelocityField::from_fn(&g, fu, |_, _| 0.0);
            let l = vector_laplacian(&f);
            let mut m: f64 = 0.0;
            for i in 1..n {
                for j in 1..n - 1 {
                    let x = i as f64 / n as f64;
                    let y = (j as f64 + 0.5) / n as f64;
                    m = m.max((l.u_at(i, j) - lap(x, y)).abs());
                }
            }
            m
        };
        let r = err(16) / err(32);
        assert!(r > 3.5 && r < 4.5, "ratio {r}");
    }

    #[test]
    fn curl_is_divergence_free_and_adjoint_matches() {
        let (nx, ny) = (9, 11);
        let g = GridSpec::new(nx, ny, 1.3, 0.9, 8, 1.0).unwrap();
        let psi: Vec<f64> = (0..(nx - 1) * (ny - 1)).map(|k| ((k * 37 % 17) as f64).sin()).collect();
        let f = curl_nodes(&psi, nx, ny, g.hx(), g.hy());
        assert!(divergence(&f).max_abs() < 1e-12);
        let mut b = VelocityField::from_fn(&g, |x, y| x.sin() + y, |x, y| (x * y).cos());
        b.apply_dirichlet();
        let lhs = f.dot(&b);
        let rhs: f64 = curl_nodes_adjoint(&b).iter().zip(&psi).map(|(a, c)| a * c).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }
}

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid_fields::{GridSpec, Region, ScalarField, VelocityField};

/// `eta = sin(pi x / lx) sin(pi y / ly)` sampled on cells and faces, with its
/// analytic gradient at cell centres. `|eta|_inf = 1`, attained at the
/// single interior critical point, the domain centre.
#[derive(Debug, Clone)]
pub struct EtaField {
    pub cells: ScalarField,
    pub grad_x: ScalarField,
    pub grad_y: ScalarField,
    pub faces: VelocityField,
    pub norm: f64,
    pub critical_point: (f64, f64),
}

pub fn eta_value(grid: &GridSpec, x: f64, y: f64) -> f64 {
    ((PI * x / grid.lx).sin() * (PI * y / grid.ly).sin()).max(0.0)
}

/// Builds `eta` and checks that it is positive inside, zero on the walls and
/// has no critical point outside `omega0`.
pub fn eta_field(grid: &GridSpec, omega0: &Region) -> Result<EtaField> {
    grid.validate()?;
    omega0.validate()?;
    let (kx, ky) = (PI / grid.lx, PI / grid.ly);
    let centre = (0.5 * grid.lx, 0.5 * grid.ly);
    if !omega0.contains_strictly(centre.0, centre.1) {
        let i = ((centre.0 / grid.hx()) as usize).min(grid.nx - 1);
        let j = ((centre.1 / grid.hy()) as usize).min(grid.ny - 1);
        return Err(Error::Geometry(format!(
            "critical point of eta at ({:.4}, {:.4}), cell ({i}, {j}), lies outside omega0 \
             [{}, {}] x [{}, {}]",
            centre.0, centre.1, omega0.x0, omega0.x1, omega0.y0, omega0.y1
        )));
    }

    let cells = ScalarField::from_fn(grid, |x, y| eta_value(grid, x, y));
    let grad_x = ScalarField::from_fn(grid, |x, y| kx * (kx * x).cos() * (ky * y).sin());
    let grad_y = ScalarField::from_fn(grid, |x, y| ky * (kx * x).sin() * (ky * y).cos());
    let faces = VelocityField::from_fn(grid, |x, y| eta_value(grid, x, y), |x, y| eta_value(grid, x, y));

    for i in 0..grid.nx {
        for j in 0..grid.ny {
            let (x, y) = ((i as f64 + 0.5) * grid.hx(), (j as f64 + 0.5) * grid.hy());
            if !(cells.at(i, j) > 0.0) {
                return Err(Error::Geometry(format!("eta not positive in cell ({i}, {j})")));
            }
            let g = grad_x.at(i, j).hypot(grad_y.at(i, j));
            if !omega0.contains(x, y) && !(g > 0.0) {
                return Err(Error::Geometry(format!(
                    "grad eta vanishes in cell ({i}, {j}) outside omega0"
                )));
            }
        }
    }
    let walls = (0..grid.ny)
        .map(|j| faces.u_at(0, j).max(faces.u_at(grid.nx, j)))
        .chain((0..grid.nx).map(|i| faces.v_at(i, 0).max(faces.v_at(i, grid.ny))))
        .fold(0.0_f64, f64::max);
    if walls > 1e-12 {
        return Err(Error::Geometry(format!("eta = {walls:e} on the boundary")));
    }
    Ok(EtaField {
        cells,
        grad_x,
        grad_y,
        faces,
        norm: 1.0,
        critical_point: centre,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centred_omega0_passes() {
        let g = GridSpec::unit(16, 8, 1.0).unwrap();
        let e = eta_field(&g, &Region::new(0.4, 0.6, 0.4, 0.6).unwrap()).unwrap();
        assert_eq!(eta_value(&g, 0.5, 0.5), 1.0);
        assert_eq!(e.critical_point, (0.5, 0.5));
        assert!(e.cells.max_abs() <= 1.0);
    }

    #[test]
    fn boundary_cells_are_small_with_nonzero_gradient() {
        let g = GridSpec::unit(16, 8, 1.0).unwrap();
        let e = eta_field(&g, &Region::new(0.4, 0.6, 0.4, 0.6).unwrap()).unwrap();
        let bound = (PI * g.hx() / 2.0).sin();
        let slope = PI * bound * (PI * g.hx() / 2.0).cos();
        for j in 0..16 {
            for (i, jj) in [(0, j), (15, j), (j, 0), (j, 15)] {
                assert!(e.cells.at(i, jj) <= bound + 1e-15);
                assert!(e.grad_x.at(i, jj).hypot(e.grad_y.at(i, jj)) > 0.99 * slope);
            }
        }
    }

    #[test]
    fn shifted_omega0_is_rejected() {
        let g = GridSpec::unit(16, 8, 1.0).unwrap();
        let err = eta_field(&g, &Region::new(0.6, 0.8, 0.6, 0.8).unwrap()).unwrap_err();
        match err {
            Error::Geometry(msg) => assert!(msg.contains("cell (8, 8)"), "{msg}"),
            e => panic!("{e}"),
        }
    }
}

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stackelberg_core::grid_fields::{stream_velocity, GridSpec, Trajectory, VelocityField};
use stackelberg_core::robust_saddle::{RobustParams, SaddleProblem};
use stackelberg_core::stokes_core::{ControlGeometry, FlowSolver, SolverOptions};

fn setup() -> (FlowSolver, VelocityField, Trajectory) {
    let g = GridSpec::unit(16, 32, 0.1).unwrap();
    let s = FlowSolver::new(ControlGeometry::default_layout(&g).unwrap()).unwrap();
    let y0 = stream_velocity(&g, |x, y| 0.05 * ((PI * x).sin() * (PI * y).sin()).powi(2));
    let yd = Trajectory::from_fn(&g, |t| VelocityField::from_fn(&g, |x, _| t + x, |_, y| -y));
    (s, y0, yd)
}

/// Second differences of `f` on the stencil `-2..=2`, centred at -1, 0, 1.
fn second_differences(f: impl Fn(f64) -> f64) -> [f64; 3] {
    let v: Vec<f64> = (-2..=2).map(|k| f(k as f64)).collect();
    [v[0] - 2.0 * v[1] + v[2], v[1] - 2.0 * v[2] + v[3], v[2] - 2.0 * v[3] + v[4]]
}

#[test]
fn robust_functional_is_concave_in_disturbance_and_convex_in_follower() {
    let (s, y0, yd) = setup();
    let g = *s.grid();
    let p = SaddleProblem::new(&s, &y0, RobustParams::default(), SolverOptions::default()).with_yd(Some(&yd));
    let saddle = p.saddle_from_coupled().unwrap();
    let j_bar = p.eval_jr(&saddle.psi_bar, &saddle.v_bar).unwrap();
    let tol = 1e-8 * (j_bar.abs() + 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let chi = &s.geometry().follower_indicator;
    for _ in 0..4 {
        let dpsi = Trajectory::random(&g, &mut rng, 1e-2);
        let dv = Trajectory::random(&g, &mut rng, 1e-2).hadamard(chi);
        let along_psi =
            second_differences(|t| p.eval_jr(&saddle.psi_bar.add(&dpsi.scaled(t)), &saddle.v_bar).unwrap());
        let along_v = second_differences(|t| p.eval_jr(&saddle.psi_bar, &saddle.v_bar.add(&dv.scaled(t))).unwrap());
        for d in along_psi {
            assert!(d <= tol, "disturbance second difference {d:e}");
        }
        for d in along_v {
            assert!(d >= -tol, "follower second difference {d:e}");
        }
    }
}

#[test]
fn coupled_saddle_matches_closed_form_and_independent_gradient() {
    let (s, y0, yd) = setup();
    let params = RobustParams::default();
    let p = SaddleProblem::new(&s, &y0, params, SolverOptions::default()).with_yd(Some(&yd));
    let saddle = p.saddle_from_coupled().unwrap();
    // psi = gamma^-2 z and v = -ell^-2 z on O, with z the tracking adjoint
    let psi = saddle.z.scaled(params.inv_gamma2());
    let v = saddle.z.hadamard(&s.geometry().follower_indicator).scaled(-params.inv_ell2());
    assert!(psi.sub(&saddle.psi_bar).norm() <= 1e-6 * psi.norm());
    assert!(v.sub(&saddle.v_bar).norm() <= 1e-6 * v.norm());
    let (gpsi, gv) = p.grad_jr(&saddle.psi_bar, &saddle.v_bar).unwrap();
    let scale = params.gamma2() * saddle.psi_bar.norm() + params.ell2() * saddle.v_bar.norm();
    assert!(gpsi.norm() <= 1e-6 * scale, "{:e}", gpsi.norm());
    assert!(gv.norm() <= 1e-6 * scale, "{:e}", gv.norm());
}

use serde::{Deserialize, Serialize};

use super::params::CarlemanParams;
use super::weights::{f_lambda, ln_family, Family};
use super::LogSum;
use crate::error::{Error, Result};
use crate::grid_fields::ops::vector_laplacian;
use crate::grid_fields::{divergence, VelocityField};

/// Midpoints `(k + 1/2) T / n`: a guard band of half a step around both poles.
pub fn midpoint_t_grid(horizon: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| (k as f64 + 0.5) * horizon / n as f64).collect()
}

/// Log-domain ratio curve of a pointwise weight inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    /// `(t, ln ratio)` on the time grid.
    pub curve: Vec<(f64, f64)>,
    pub max_ln_ratio: f64,
    /// `exp(max_ln_ratio)`; zero when it underflows.
    pub max_ratio: f64,
    pub argmax_t: f64,
}

/// Ratio `e^{s a*} / (s^M1 lambda^M2 xi_hat^M1 e^{s (1+eps) a_hat})` over
/// `t_grid`. Errors when `(1 + eps) F(lambda) <= 1`, where the inequality
/// fails for large `s`.
pub fn check_lemma_relationship(
    params: &CarlemanParams,
    m1: f64,
    m2: f64,
    epsilon: f64,
    t_grid: &[f64],
    horizon: f64,
) -> Result<LemmaCheck> {
    if !(epsilon > 0.0) {
        return Err(Error::Precondition(format!("epsilon must be positive, got {epsilon}")));
    }
    let f = f_lambda(params.lambda(), params.eta_norm())?;
    if (1.0 + epsilon) * f <= 1.0 {
        return Err(Error::Precondition(format!(
            "(1 + eps) F(lambda) = {} <= 1: no lambda_0 for eps = {epsilon} at lambda = {}",
            (1.0 + epsilon) * f,
            params.lambda()
        )));
    }
    if t_grid.is_empty() {
        return Err(Error::Precondition("empty time grid".into()));
    }
    let (ln_s, ln_lam) = (params.s().ln(), params.lambda().ln());
    let mut curve = Vec::with_capacity(t_grid.len());
    let (mut best, mut argmax) = (f64::NEG_INFINITY, t_grid[0]);
    for &t in t_grid {
        let ln_a_star = ln_family(Family::AlphaStar, params, 0.0, t, horizon)?;
        let ln_a_hat = ln_family(Family::AlphaHat, params, 0.0, t, horizon)?;
        let ln_xi_hat = ln_family(Family::XiHat, params, 0.0, t, horizon)?;
        // s a* - s (1 + eps) a_hat = -s a* ((1 + eps) a_hat / a* - 1)
        let gap = (1.0 + epsilon) * (ln_a_hat - ln_a_star).exp() - 1.0;
        let exponent = -(ln_s + ln_a_star + gap.ln()).exp();
        let r = exponent - m1 * ln_s - m2 * ln_lam - m1 * ln_xi_hat;
        if r > best {
            best = r;
            argmax = t;
        }
        curve.push((t, r));
    }
    Ok(LemmaCheck {
        curve,
        max_ln_ratio: best,
        max_ratio: best.exp(),
        argmax_t: argmax,
    })
}

/// Quotient of the local and global weighted `|Lap u|^2` integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralCheck {
    /// `ln` of the quotient per sample (`-inf` for a zero quotient).
    pub ln_ratios: Vec<f64>,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub max_ln_ratio: f64,
}

/// For each time-independent divergence-free `u`, the quotient
/// `s^M1 lambda^M2 int_{omega x (0,T)} e^{-4 s a_hat - 2 a0 s a*} xi_hat^M1 |Lap u|^2`
/// over `s^-1 int_Q e^{-2 m0 s a*} xi_hat^-1 |Lap u|^2`, with midpoint
/// quadrature on `n_t` time cells. A zero numerator gives ratio 0.
pub fn check_lemma_integral(
    params: &CarlemanParams,
    m1: f64,
    m2: f64,
    u_samples: &[VelocityField],
    omega_mask: &VelocityField,
    horizon: f64,
    n_t: usize,
) -> Result<IntegralCheck> {
    params.check_integral_regime()?;
    if n_t == 0 {
        return Err(Error::Precondition("time grid needs at least one cell".into()));
    }
    let (s, a0, m0) = (params.s(), params.a0(), params.m0());
    let (mut local, mut global) = (LogSum::default(), LogSum::default());
    for t in midpoint_t_grid(horizon, n_t) {
        let a_star = ln_family(Family::AlphaStar, params, 0.0, t, horizon)?.exp();
        let a_hat = ln_family(Family::AlphaHat, params, 0.0, t, horizon)?.exp();
        let ln_xi_hat = ln_family(Family::XiHat, params, 0.0, t, horizon)?;
        local.add(-4.0 * s * a_hat - 2.0 * a0 * s * a_star + m1 * ln_xi_hat);
        global.add(-2.0 * m0 * s * a_star - ln_xi_hat);
    }
    if global.ln() == f64::NEG_INFINITY {
        return Err(Error::Precondition("global weight underflows on the whole time grid".into()));
    }
    // the midpoint quadrature weight cancels in the quotient
    let ln_time = local.ln() - global.ln();
    let ln_pre = m1 * s.ln() + m2 * params.lambda().ln() + s.ln();

    let mut ln_ratios = Vec::with_capacity(u_samples.len());
    for u in u_samples {
        if !u.same_shape(omega_mask) {
            return Err(Error::Shape("sample and mask shapes differ".into()));
        }
        let div = divergence(u).max_abs();
        if div > 1e-8 * (u.max_abs() / u.hx.min(u.hy)).max(f64::MIN_POSITIVE) {
            return Err(Error::Precondition(format!("sample is not divergence free ({div:e})")));
        }
        let lap = vector_laplacian(u);
        let total = lap.dot(&lap);
        let on_omega = lap.hadamard(omega_mask);
        let part = on_omega.dot(&on_omega);
        let r = if part == 0.0 || total == 0.0 {
            f64::NEG_INFINITY
        } else {
            ln_pre + ln_time + part.ln() - total.ln()
        };
        ln_ratios.push(r);
    }
    let max_ln_ratio = ln_ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(IntegralCheck {
        ratios: ln_ratios.iter().map(|r| r.exp()).collect(),
        ln_ratios,
        max_ratio: max_ln_ratio.exp(),
        max_ln_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_fields::ops::random_stream_velocity;
    use crate::grid_fields::{GridSpec, Region};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(lambda: f64, s: f64) -> CarlemanParams {
        CarlemanParams::default().with_lambda(lambda).unwrap().with_s(s).unwrap()
    }

    #[test]
    fn large_epsilon_bounds_ratio_below_one() {
        let grid = midpoint_t_grid(1.0, 64);
        for lam in [1.0, 2.0, 4.0] {
            let c = check_lemma_relationship(&params(lam, 10.0), 1.0, 1.0, 10.0, &grid, 1.0).unwrap();
            assert!(c.max_ln_ratio.is_finite() && c.max_ratio < 1.0, "{lam}: {}", c.max_ln_ratio);
        }
    }

    #[test]
    fn hypothesis_violation_is_reported() {
        // F(lambda) -> 1/2 as lambda -> 0, so eps = 0.5 fails for small lambda
        let grid = midpoint_t_grid(1.0, 8);
        let e = check_lemma_relationship(&params(0.01, 1.0), 0.0, 0.0, 0.5, &grid, 1.0).unwrap_err();
        assert!(matches!(e, Error::Precondition(_)));
    }

    #[test]
    fn max_ratio_decreases_with_lambda() {
        let grid = midpoint_t_grid(1.0, 64);
        let maxima: Vec<f64> = [1.0, 2.0, 4.0]
            .iter()
            .map(|&l| check_lemma_relationship(&params(l, 1.0), 0.0, 0.0, 1.0, &grid, 1.0).unwrap().max_ln_ratio)
            .collect();
        assert!(maxima[1] <= maxima[0] && maxima[2] <= maxima[1], "{maxima:?}");
        assert!(maxima.iter().all(|m| m.is_finite()));
    }

    #[test]
    fn integral_zero_and_off_support_cases() {
        let g = GridSpec::unit(16, 8, 20.0).unwrap();
        let mask = Region::new(0.35, 0.75, 0.35, 0.75).unwrap().face_mask(&g);
        let p = params(2.0, 5.0);
        let zero = VelocityField::zeros(&g);
        let c = check_lemma_integral(&p, 1.0, 1.0, &[zero], &mask, 20.0, 32).unwrap();
        assert_eq!(c.max_ratio, 0.0);
        // stream function supported in [0, 0.25]^2, two cells away from omega
        let u = crate::grid_fields::stream_velocity(&g, |x, y| {
            if x < 0.25 && y < 0.25 {
                ((4.0 * std::f64::consts::PI * x).sin() * (4.0 * std::f64::consts::PI * y).sin()).powi(2)
            } else {
                0.0
            }
        });
        let c = check_lemma_integral(&p, 1.0, 1.0, &[u], &mask, 20.0, 32).unwrap();
        assert_eq!(c.max_ratio, 0.0);
    }

    #[test]
    fn integral_regime_is_enforced() {
        let g = GridSpec::unit(8, 8, 1.0).unwrap();
        let mask = VelocityField::zeros(&g);
        let p = CarlemanParams::new(2.0, 5.0, 1.5, 2.7, 1.0).unwrap();
        assert!(check_lemma_integral(&p, 0.0, 0.0, &[], &mask, 1.0, 8).is_err());
    }

    #[test]
    fn integral_ratio_stable_under_time_refinement() {
        let horizon = 20.0;
        let g = GridSpec::unit(16, 8, horizon).unwrap();
        let mask = Region::new(0.35, 0.75, 0.35, 0.75).unwrap().face_mask(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<_> = (0..10).map(|_| random_stream_velocity(&g, &mut rng, 4)).collect();
        let p = params(2.0, 5.0);
        let a = check_lemma_integral(&p, 1.0, 1.0, &samples, &mask, horizon, 64).unwrap();
        let b = check_lemma_integral(&p, 1.0, 1.0, &samples, &mask, horizon, 128).unwrap();
        assert!(a.max_ratio > 0.0 && a.max_ratio.is_finite());
        let change = (b.max_ln_ratio - a.max_ln_ratio).exp() - 1.0;
        assert!(change.abs() <= 0.2, "{} -> {}", a.max_ratio, b.max_ratio);
    }
}

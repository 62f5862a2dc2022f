//! Weight families evaluated in the log domain.
//!
//! With `n = |eta|_inf` and `l(t)` either `t (T - t)` (alpha/xi families) or
//! the regularised `l~(t)` equal to `T^2/4` on `[0, T/2]` and `t (T - t)` after
//! (beta/tau families):
//!
//! * `alpha = (e^{12 lambda n} - e^{lambda (10 n + eta)}) / l^5`
//! * `xi = e^{lambda (10 n + eta)} / l^5`
//!
//! Starred and hatted variants are the extremes over `x`, attained at
//! `eta = 0` or `eta = n`.

use serde::{Deserialize, Serialize};

use super::params::CarlemanParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Alpha,
    Xi,
    AlphaStar,
    XiStar,
    AlphaHat,
    XiHat,
    Beta,
    Tau,
    BetaStar,
    TauStar,
    BetaHat,
    TauHat,
}

impl Family {
    pub const ALL: [Family; 12] = [
        Family::Alpha,
        Family::Xi,
        Family::AlphaStar,
        Family::XiStar,
        Family::AlphaHat,
        Family::XiHat,
        Family::Beta,
        Family::Tau,
        Family::BetaStar,
        Family::TauStar,
        Family::BetaHat,
        Family::TauHat,
    ];

    /// Beta/tau families stay finite at `t = 0`.
    pub fn regular_at_start(self) -> bool {
        use Family::*;
        matches!(self, Beta | Tau | BetaStar | TauStar | BetaHat | TauHat)
    }

    fn is_alpha_type(self) -> bool {
        use Family::*;
        matches!(self, Alpha | AlphaStar | AlphaHat | Beta | BetaStar | BetaHat)
    }

    /// `eta` at which the extremal variant is attained, as a fraction of `n`.
    fn extremal_fraction(self) -> Option<f64> {
        use Family::*;
        match self {
            AlphaStar | XiStar | BetaStar | TauStar => Some(0.0),
            AlphaHat | XiHat | BetaHat | TauHat => Some(1.0),
            Alpha | Xi | Beta | Tau => None,
        }
    }

    /// Space-independent variants.
    pub fn is_extremal(self) -> bool {
        self.extremal_fraction().is_some()
    }
}

/// `ln l(t)` for the family, with pole and range errors.
pub fn ln_time_factor(family: Family, t: f64, horizon: f64) -> Result<f64> {
    if !(horizon > 0.0) || !t.is_finite() || t < 0.0 || t > horizon {
        return Err(Error::Precondition(format!(
            "time {t} outside [0, {horizon}]"
        )));
    }
    if t == horizon || (t == 0.0 && !family.regular_at_start()) {
        return Err(Error::Pole { t, horizon });
    }
    if family.regular_at_start() && t <= 0.5 * horizon {
        Ok(2.0 * (0.5 * horizon).ln())
    } else {
        Ok(t.ln() + (horizon - t).ln())
    }
}

/// `ln` of the family value at a point with weight-function value `eta`.
/// `eta` is ignored for extremal variants.
pub fn ln_family(family: Family, params: &CarlemanParams, eta: f64, t: f64, horizon: f64) -> Result<f64> {
    let n = params.eta_norm();
    let lam = params.lambda();
    let e = match family.extremal_fraction() {
        Some(f) => f * n,
        None => {
            if !(eta >= -1e-12 * n && eta <= n * (1.0 + 1e-12)) {
                return Err(Error::Precondition(format!("eta = {eta} outside [0, {n}]")));
            }
            eta.clamp(0.0, n)
        }
    };
    let ln_l = ln_time_factor(family, t, horizon)?;
    let ln_num = if family.is_alpha_type() {
        // e^{12 lam n} (1 - e^{-lam (2n - e)})
        12.0 * lam * n + (-(-lam * (2.0 * n - e)).exp_m1()).ln()
    } else {
        lam * (10.0 * n + e)
    };
    Ok(ln_num - 5.0 * ln_l)
}

/// One factor `exp(exp_coef * s * f) * f^power` of a Carleman weight, where
/// `f` is the family value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub family: Family,
    pub params: CarlemanParams,
    pub exp_coef: f64,
    pub power: f64,
}

impl WeightSpec {
    /// The family value itself.
    pub fn plain(family: Family, params: CarlemanParams) -> Self {
        WeightSpec {
            family,
            params,
            exp_coef: 0.0,
            power: 1.0,
        }
    }

    /// `exp(coef * s * f)`.
    pub fn exponential(family: Family, params: CarlemanParams, coef: f64) -> Self {
        WeightSpec {
            family,
            params,
            exp_coef: coef,
            power: 0.0,
        }
    }

    /// `f^power`.
    pub fn power(family: Family, params: CarlemanParams, power: f64) -> Self {
        WeightSpec {
            family,
            params,
            exp_coef: 0.0,
            power,
        }
    }

    /// Logarithm of the factor. Only the combination `ln s + ln f` is
    /// exponentiated, so the result is finite while `s f` fits in a double.
    pub fn ln_eval(&self, eta: f64, t: f64, horizon: f64) -> Result<f64> {
        let lf = ln_family(self.family, &self.params, eta, t, horizon)?;
        let mut out = 0.0;
        if self.power != 0.0 {
            out += self.power * lf;
        }
        if self.exp_coef != 0.0 {
            let mag = (self.exp_coef.abs().ln() + self.params.s().ln() + lf).exp();
            out += self.exp_coef.signum() * mag;
        }
        Ok(out)
    }

    pub fn eval(&self, eta: f64, t: f64, horizon: f64) -> Result<f64> {
        Ok(self.ln_eval(eta, t, horizon)?.exp())
    }
}

/// Value of a single weight factor.
pub fn weight_eval(spec: &WeightSpec, eta: f64, t: f64, horizon: f64) -> Result<f64> {
    spec.eval(eta, t, horizon)
}

/// `ln` of a product of factors.
pub fn ln_weight_product(specs: &[WeightSpec], eta: f64, t: f64, horizon: f64) -> Result<f64> {
    let mut out = 0.0;
    for s in specs {
        out += s.ln_eval(eta, t, horizon)?;
    }
    if out.is_nan() {
        return Err(Error::Precondition(
            "weight exponents of opposite sign both overflow".into(),
        ));
    }
    Ok(out)
}

/// Weight table over a time grid.
pub fn weight_table(spec: &WeightSpec, eta: f64, times: &[f64], horizon: f64) -> Result<Vec<f64>> {
    times.iter().map(|&t| spec.eval(eta, t, horizon)).collect()
}

/// `alpha_hat / alpha_star` from the weight definitions, `1 / (1 + e^{-lambda n})`.
pub fn f_lambda(lambda: f64, eta_norm: f64) -> Result<f64> {
    if !(lambda > 0.0 && eta_norm > 0.0) || !lambda.is_finite() || !eta_norm.is_finite() {
        return Err(Error::Precondition(format!(
            "F(lambda) needs positive finite lambda and eta_norm, got {lambda}, {eta_norm}"
        )));
    }
    // numerators of alpha_hat and alpha_star with the common e^{12 lambda n} removed
    let x = lambda * eta_norm;
    Ok((-(-x).exp_m1()) / (-(-2.0 * x).exp_m1()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(lambda: f64) -> CarlemanParams {
        CarlemanParams::default().with_lambda(lambda).unwrap()
    }

    #[test]
    fn xi_boundary_value_at_midpoint() {
        let v = weight_eval(&WeightSpec::plain(Family::Xi, params(1.0)), 0.0, 0.5, 1.0).unwrap();
        let expect = 10f64.exp() * 1024.0;
        assert!((v - expect).abs() <= 1e-13 * expect, "{v} vs {expect}");
    }

    #[test]
    fn extremal_ordering() {
        let p = params(1.5);
        for k in 1..40 {
            let t = k as f64 / 40.0;
            let ev = |f: Family, eta: f64| weight_eval(&WeightSpec::plain(f, p), eta, t, 1.0).unwrap();
            assert!(ev(Family::AlphaStar, 0.3) >= ev(Family::AlphaHat, 0.3));
            assert!(ev(Family::XiHat, 0.3) >= ev(Family::XiStar, 0.3));
            for j in 0..=10 {
                let eta = j as f64 / 10.0;
                assert!(ev(Family::AlphaHat, 0.0) <= ev(Family::Alpha, eta));
                assert!(ev(Family::Alpha, eta) <= ev(Family::AlphaStar, 0.0));
                assert!(ev(Family::XiStar, 0.0) <= ev(Family::Xi, eta));
                assert!(ev(Family::Xi, eta) <= ev(Family::XiHat, 0.0));
            }
        }
    }

    #[test]
    fn beta_matches_alpha_on_second_half() {
        let p = params(2.0);
        let horizon = 3.0;
        // independent path: the closed forms with l = t (T - t)
        let n = p.eta_norm();
        let lam = p.lambda();
        for k in 0..=64 {
            let t = 1.5 + 1.4999 * k as f64 / 64.0;
            for eta in [0.0, 0.25, 1.0] {
                let l5 = (t * (horizon - t)).powi(5);
                let alpha = ((12.0 * lam * n).exp() - (lam * (10.0 * n + eta)).exp()) / l5;
                let xi = (lam * (10.0 * n + eta)).exp() / l5;
                let beta = weight_eval(&WeightSpec::plain(Family::Beta, p), eta, t, horizon).unwrap();
                let tau = weight_eval(&WeightSpec::plain(Family::Tau, p), eta, t, horizon).unwrap();
                let a = weight_eval(&WeightSpec::plain(Family::Alpha, p), eta, t, horizon).unwrap();
                assert!((beta - alpha).abs() <= 1e-14 * alpha);
                assert!((tau - xi).abs() <= 1e-14 * xi);
                assert_eq!(a, beta);
            }
        }
    }

    #[test]
    fn beta_is_flat_on_first_half_and_continuous() {
        let p = params(1.0);
        let spec = WeightSpec::plain(Family::BetaStar, p);
        let b0 = weight_eval(&spec, 0.0, 0.0, 2.0).unwrap();
        let bh = weight_eval(&spec, 0.0, 1.0, 2.0).unwrap();
        let bh_plus = weight_eval(&spec, 0.0, 1.0 + 1e-9, 2.0).unwrap();
        assert_eq!(b0, bh);
        assert!((bh_plus - bh).abs() <= 1e-12 * bh);
    }

    #[test]
    fn poles_and_ranges() {
        let p = params(1.0);
        let e = |f: Family, t: f64| weight_eval(&WeightSpec::plain(f, p), 0.5, t, 1.0);
        assert!(matches!(e(Family::Alpha, 0.0), Err(Error::Pole { .. })));
        assert!(matches!(e(Family::XiHat, 1.0), Err(Error::Pole { .. })));
        assert!(matches!(e(Family::Tau, 1.0), Err(Error::Pole { .. })));
        assert!(e(Family::Beta, 0.0).unwrap().is_finite());
        assert!(matches!(e(Family::Beta, 1.5), Err(Error::Precondition(_))));
        assert!(matches!(e(Family::Alpha, -0.1), Err(Error::Precondition(_))));
        assert!(weight_eval(&WeightSpec::plain(Family::Alpha, p), 1.5, 0.5, 1.0).is_err());
    }

    #[test]
    fn poles_diverge_on_refining_grid() {
        let p = params(1.0);
        for f in Family::ALL {
            let spec = WeightSpec::plain(f, p);
            let near_end = weight_eval(&spec, 0.5, 1.0 - 1e-4, 1.0).unwrap();
            assert!(near_end > 1e12, "{f:?} at T: {near_end}");
            let near_start = weight_eval(&spec, 0.5, 1e-4, 1.0).unwrap();
            if f.regular_at_start() {
                assert!(near_start < 1e12 && near_start == weight_eval(&spec, 0.5, 0.0, 1.0).unwrap());
            } else {
                assert!(near_start > 1e12, "{f:?} at 0: {near_start}");
            }
        }
    }

    #[test]
    fn f_lambda_limits_and_oracle() {
        assert!((f_lambda(50.0, 1.0).unwrap() - 1.0).abs() < 1e-9);
        assert!((f_lambda(1e-6, 1.0).unwrap() - 0.5).abs() < 1e-5);
        // 1 / (1 + e^{-1}) = 0.7310585786300048792511592..., rounded to f64
        let oracle = 0.731_058_578_630_004_9_f64;
        assert!((f_lambda(1.0, 1.0).unwrap() - oracle).abs() <= 2e-16);
        assert!(f_lambda(0.0, 1.0).is_err());
    }

    #[test]
    fn f_lambda_is_the_extremal_ratio() {
        for lam in [0.1, 1.0, 3.0] {
            let p = params(lam);
            let t = 0.3;
            let a_star = ln_family(Family::AlphaStar, &p, 0.0, t, 1.0).unwrap();
            let a_hat = ln_family(Family::AlphaHat, &p, 0.0, t, 1.0).unwrap();
            let f = f_lambda(lam, 1.0).unwrap();
            assert!(((a_hat - a_star).exp() - f).abs() < 1e-14);
        }
    }

    #[test]
    fn exponential_factor_in_log_domain() {
        let p = CarlemanParams::new(50.0, 200.0, 2.0, 3.5, 1.0).unwrap();
        let spec = WeightSpec::exponential(Family::AlphaStar, p, -2.0);
        let ln = spec.ln_eval(0.0, 0.5, 1.0).unwrap();
        assert!(ln.is_finite() && ln < -1e200);
        assert_eq!(spec.eval(0.0, 0.5, 1.0).unwrap(), 0.0);
    }
}

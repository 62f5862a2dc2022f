use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights `(ell, gamma, mu)` of the robust functional.
///
/// `ell` and `gamma` may be `+inf` (follower or disturbance switched off) and
/// `mu` may be zero (no tracking term); these limits decouple the optimality
/// system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustParams {
    pub ell: f64,
    pub gamma: f64,
    pub mu: f64,
}

impl Default for RobustParams {
    fn default() -> Self {
        RobustParams {
            ell: 10.0,
            gamma: 10.0,
            mu: 1.0,
        }
    }
}

impl RobustParams {
    pub fn new(ell: f64, gamma: f64, mu: f64) -> Result<Self> {
        let p = RobustParams { ell, gamma, mu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ell > 0.0) || self.ell.is_nan() {
            return Err(Error::Config(format!("ell must be positive (got {})", self.ell)));
        }
        if !(self.gamma > 0.0) || self.gamma.is_nan() {
            return Err(Error::Config(format!("gamma must be positive (got {})", self.gamma)));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::Config(format!("mu must be finite and non-negative (got {})", self.mu)));
        }
        Ok(())
    }

    pub fn inv_ell2(&self) -> f64 {
        1.0 / (self.ell * self.ell)
    }

    pub fn inv_gamma2(&self) -> f64 {
        1.0 / (self.gamma * self.gamma)
    }

    pub fn ell2(&self) -> f64 {
        self.ell * self.ell
    }

    pub fn gamma2(&self) -> f64 {
        self.gamma * self.gamma
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        RobustParams { gamma, ..self }
    }

    pub fn with_mu(self, mu: f64) -> Self {
        RobustParams { mu, ..self }
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Carleman parameters. Fields are private so that every value satisfies
/// `5/4 <= a0 < a0 + 1 < m0 < 2 a0` and `m0 < 2 + a0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCarlemanParams", into = "RawCarlemanParams")]
pub struct CarlemanParams {
    lambda: f64,
    s: f64,
    a0: f64,
    m0: f64,
    eta_norm: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawCarlemanParams {
    lambda: f64,
    s: f64,
    a0: f64,
    m0: f64,
    eta_norm: f64,
}

impl Default for RawCarlemanParams {
    fn default() -> Self {
        RawCarlemanParams {
            lambda: 2.0,
            s: 3.0,
            a0: 2.0,
            m0: 3.5,
            eta_norm: 1.0,
        }
    }
}

impl TryFrom<RawCarlemanParams> for CarlemanParams {
    type Error = Error;

    fn try_from(r: RawCarlemanParams) -> Result<Self> {
        CarlemanParams::new(r.lambda, r.s, r.a0, r.m0, r.eta_norm)
    }
}

impl From<CarlemanParams> for RawCarlemanParams {
    fn from(p: CarlemanParams) -> Self {
        RawCarlemanParams {
            lambda: p.lambda,
            s: p.s,
            a0: p.a0,
            m0: p.m0,
            eta_norm: p.eta_norm,
        }
    }
}

impl Default for CarlemanParams {
    fn default() -> Self {
        RawCarlemanParams::default()
            .try_into()
            .expect("default Carleman parameters satisfy the constraint chain")
    }
}

impl CarlemanParams {
    pub fn new(lambda: f64, s: f64, a0: f64, m0: f64, eta_norm: f64) -> Result<Self> {
        for (name, v) in [("lambda", lambda), ("s", s), ("eta_norm", eta_norm)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(a0.is_finite() && m0.is_finite()) {
            return Err(Error::Config("a0 and m0 must be finite".into()));
        }
        if !(1.25 <= a0 && a0 + 1.0 < m0 && m0 < 2.0 * a0 && m0 < 2.0 + a0) {
            return Err(Error::Config(format!(
                "a0 = {a0}, m0 = {m0} violate 5/4 <= a0 < a0 + 1 < m0 < 2 a0, m0 < 2 + a0"
            )));
        }
        Ok(CarlemanParams {
            lambda,
            s,
            a0,
            m0,
            eta_norm,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    pub fn eta_norm(&self) -> f64 {
        self.eta_norm
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(lambda, self.s, self.a0, self.m0, self.eta_norm)
    }

    pub fn with_s(&self, s: f64) -> Result<Self> {
        Self::new(self.lambda, s, self.a0, self.m0, self.eta_norm)
    }

    /// The stronger regime `a0 >= 2`, `a0 < m0 <= a0 + 2` of the integral lemma.
    pub fn check_integral_regime(&self) -> Result<()> {
        if self.a0 >= 2.0 && self.a0 < self.m0 && self.m0 <= self.a0 + 2.0 {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "integral weight bound needs a0 >= 2 and a0 < m0 <= a0 + 2 (a0 = {}, m0 = {})",
                self.a0, self.m0
            )))
        }
    }
}

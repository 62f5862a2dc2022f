//! Carleman weight families, the weight function `eta`, and empirical
//! checks of the weight inequalities and of the observability constant.

mod enorm;
mod eta;
mod lemmas;
mod observability;
mod params;
mod weights;

pub use enorm::{e_norm, source_weighted_norms, target_weighted_norm, ENormReport};
pub use eta::{eta_field, eta_value, EtaField};
pub use lemmas::{check_lemma_integral, check_lemma_relationship, midpoint_t_grid, IntegralCheck, LemmaCheck};
pub use observability::{observability_quotient, observability_ratio, ObservabilityQuotient, ObservabilityReport};
pub use params::CarlemanParams;
pub use weights::{f_lambda, ln_family, ln_time_factor, ln_weight_product, weight_eval, weight_table, Family, WeightSpec};

use crate::grid_fields::{GridSpec, VelocityField};

/// Streaming `ln(sum exp(x_i))`; `-inf` terms are skipped.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSum {
    max: f64,
    acc: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        LogSum {
            max: f64::NEG_INFINITY,
            acc: 0.0,
        }
    }
}

impl LogSum {
    pub(crate) fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.acc = self.acc * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.acc += (x - self.max).exp();
        }
    }

    pub(crate) fn ln(&self) -> f64 {
        if self.acc == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.acc.ln()
        }
    }
}

/// Control volumes used by [`VelocityField::dot`].
pub(crate) fn face_areas(grid: &GridSpec) -> VelocityField {
    let mut a = VelocityField::from_fn(grid, |_, _| grid.cell_area(), |_, _| grid.cell_area());
    let (nx, ny) = (grid.nx, grid.ny);
    for j in 0..ny {
        a.u[j] *= 0.5;
        a.u[nx * ny + j] *= 0.5;
    }
    for i in 0..nx {
        a.v[i * (ny + 1)] *= 0.5;
        a.v[i * (ny + 1) + ny] *= 0.5;
    }
    a
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure surfaced by the toolkit.
///
/// Variants are grouped so callers (the CLI in particular) can map them to
/// configuration errors versus numerical/solver failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("weight evaluated at a pole (t = {t}, horizon = {horizon})")]
    Pole { t: f64, horizon: f64 },

    #[error("Poisson solve did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    Poisson { iterations: usize, residual: f64 },

    #[error("CFL violation at step {step}: Courant number {courant:.3} exceeds 1, reduce dt")]
    Cfl { step: usize, courant: f64 },

    #[error("forward solve blew up at step {step} (norm {norm:.3e})")]
    BlowUp { step: usize, norm: f64 },

    #[error("{solver}: Picard iteration did not converge in {iterations} sweeps (last relative change {residual:.3e}); {hint}")]
    Picard {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        hint: &'static str,
    },

    #[error("conjugate gradient stagnated after {iterations} iterations (relative residual {:.3e})", residuals.last().copied().unwrap_or(f64::NAN))]
    CgStagnation { iterations: usize, residuals: Vec<f64> },

    #[error("ascent-descent diverged after {iterations} iterations (disturbance norm {psi_norm:.3e}): gamma below gamma_0")]
    Divergence { iterations: usize, psi_norm: f64 },

    #[error("saddle verification failed at probe {probe} ({side}): margin {margin:.3e} below -{tol:.3e}")]
    SaddleViolation {
        probe: usize,
        side: &'static str,
        margin: f64,
        tol: f64,
    },

    #[error("{solver} did not converge in {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("outer loop did not converge in {iterations} iterations (relative change {residual:.3e}); reduce the initial data size delta")]
    OuterLoop { iterations: usize, residual: f64 },

    #[error("{module}: {source}")]
    Pipeline {
        module: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    /// True for errors caused by invalid input rather than solver behaviour.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Shape(_) | Error::Geometry(_) | Error::Precondition(_) => {
                true
            }
            Error::Pipeline { source, .. } => source.is_config(),
            _ => false,
        }
    }

    pub(crate) fn in_module(self, module: &'static str) -> Error {
        match self {
            e @ Error::Pipeline { .. } => e,
            e => Error::Pipeline {
                module,
                source: Box::new(e),
            },
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

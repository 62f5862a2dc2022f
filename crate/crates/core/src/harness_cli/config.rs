use std::f64::consts::PI;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::carleman_weights::CarlemanParams;
use crate::error::{Error, Result};
use crate::grid_fields::ops::random_stream_velocity;
use crate::grid_fields::{stream_velocity, GridSpec, Region, SmoothCutoff, Trajectory, VelocityField};
use crate::leader_control::{v_norm, NonlinearConfig, PenaltyConfig};
use crate::robust_saddle::{AscentOptions, RobustParams};
use crate::stokes_core::{ControlGeometry, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Saddle,
    Nullcontrol,
    NullcontrolNonlinear,
    CarlemanCheck,
    Gamma0Scan,
    Convergence,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Saddle,
        Experiment::Nullcontrol,
        Experiment::NullcontrolNonlinear,
        Experiment::CarlemanCheck,
        Experiment::Gamma0Scan,
        Experiment::Convergence,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Saddle => "saddle",
            Experiment::Nullcontrol => "nullcontrol",
            Experiment::NullcontrolNonlinear => "nullcontrol-nonlinear",
            Experiment::CarlemanCheck => "carleman-check",
            Experiment::Gamma0Scan => "gamma0-scan",
            Experiment::Convergence => "convergence",
        }
    }
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Leader region `omega`, follower region `O`, tracking region `O_d` and
/// observation set `omega_0`. With `fractional = true` the corners are
/// fractions of the domain lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsConfig {
    #[serde(default)]
    pub fractional: bool,
    pub omega: Region,
    pub follower: Region,
    pub observed: Region,
    pub omega0: Region,
    /// Width of the follower cutoff ramp; default `min(4 h, 0.45 side(O))`.
    #[serde(default)]
    pub follower_taper: Option<f64>,
}

impl RegionsConfig {
    /// The built-in layout, in fractions of the domain.
    pub fn default_layout() -> Self {
        let sq = |a, b| Region {
            x0: a,
            x1: b,
            y0: a,
            y1: b,
        };
        RegionsConfig {
            fractional: true,
            omega: sq(0.35, 0.75),
            follower: sq(0.05, 0.25),
            observed: sq(0.45, 0.95),
            omega0: sq(0.47, 0.7),
            follower_taper: None,
        }
    }

    /// Regions in physical coordinates, in the order `omega, O, O_d, omega_0`.
    pub fn resolve(&self, grid: &GridSpec) -> Result<[Region; 4]> {
        let scale = |r: &Region| -> Result<Region> {
            let r = if self.fractional {
                Region {
                    x0: r.x0 * grid.lx,
                    x1: r.x1 * grid.lx,
                    y0: r.y0 * grid.ly,
                    y1: r.y1 * grid.ly,
                }
            } else {
                *r
            };
            r.validate()?;
            Ok(r)
        };
        Ok([
            scale(&self.omega)?,
            scale(&self.follower)?,
            scale(&self.observed)?,
            scale(&self.omega0)?,
        ])
    }

    /// Checks the three set relations required of the layout.
    pub fn check_hypotheses(&self, grid: &GridSpec) -> Result<()> {
        let [omega, o, od, omega0] = self.resolve(grid)?;
        let show = |r: &Region| format!("[{}, {}] x [{}, {}]", r.x0, r.x1, r.y0, r.y1);
        if let Some(common) = omega.intersection(&o) {
            return Err(Error::Geometry(format!(
                "hypothesis O ∩ ω = ∅ violated: follower region {} meets leader region {} in {}",
                show(&o),
                show(&omega),
                show(&common)
            )));
        }
        let Some(overlap) = omega.intersection(&od) else {
            return Err(Error::Geometry(format!(
                "hypothesis ω ∩ O_d ≠ ∅ violated: leader region {} misses tracking region {}",
                show(&omega),
                show(&od)
            )));
        };
        if !omega0.is_subset_of(&overlap) {
            return Err(Error::Geometry(format!(
                "hypothesis ω₀ ⊂ ω ∩ O_d violated: {} is not inside {}",
                show(&omega0),
                show(&overlap)
            )));
        }
        Ok(())
    }

    pub fn geometry(&self, grid: &GridSpec) -> Result<ControlGeometry> {
        self.check_hypotheses(grid)?;
        let [omega, o, od, omega0] = self.resolve(grid)?;
        let taper = self
            .follower_taper
            .unwrap_or_else(|| (4.0 * grid.hx().max(grid.hy())).min(0.45 * (o.x1 - o.x0).min(o.y1 - o.y0)));
        ControlGeometry::new(grid, omega, SmoothCutoff::new(o, taper)?, od, omega0)
    }
}

/// Initial velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    Zero,
    /// Stream function `amplitude * sin^2(pi x / lx) sin^2(pi y / ly)`.
    Eddy { amplitude: f64 },
    /// The same eddy rescaled to the given `H^1_0` seminorm.
    EddyVNorm { v_norm: f64 },
    /// Random smooth stream function with `modes^2` sine modes, scaled to
    /// the given largest face value.
    Random { amplitude: f64, modes: usize },
}

/// Space-time data for the leader control or the tracking target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Zero,
    /// Smooth travelling pattern, growing linearly in time.
    Waves { amplitude: f64 },
    /// Independent uniform values in `[-amplitude, amplitude)` on every face.
    Random { amplitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub y0: InitialState,
    #[serde(default = "zero_source")]
    pub leader: SourceSpec,
    #[serde(default = "zero_source")]
    pub target: SourceSpec,
}

fn zero_source() -> SourceSpec {
    SourceSpec::Zero
}

impl InitialState {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            InitialState::Zero => true,
            InitialState::Eddy { amplitude } => amplitude.is_finite(),
            InitialState::EddyVNorm { v_norm } => v_norm.is_finite() && v_norm >= 0.0,
            InitialState::Random { amplitude, modes } => amplitude.is_finite() && amplitude >= 0.0 && modes > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid initial state {self:?}")))
        }
    }

    pub fn build(&self, grid: &GridSpec, rng: &mut ChaCha8Rng) -> VelocityField {
        let eddy = |amp: f64| {
            let (lx, ly) = (grid.lx, grid.ly);
            stream_velocity(grid, |x, y| amp * ((PI * x / lx).sin() * (PI * y / ly).sin()).powi(2))
        };
        match *self {
            InitialState::Zero => VelocityField::zeros(grid),
            InitialState::Eddy { amplitude } => eddy(amplitude),
            InitialState::EddyVNorm { v_norm: target } => {
                let shape = eddy(1.0);
                shape.scaled(target / v_norm(&shape))
            }
            InitialState::Random { amplitude, modes } => {
                let f = random_stream_velocity(grid, rng, modes);
                let m = f.max_abs();
                if m > 0.0 {
                    f.scaled(amplitude / m)
                } else {
                    f
                }
            }
        }
    }
}

impl SourceSpec {
    fn validate(&self) -> Result<()> {
        match *self {
            SourceSpec::Waves { amplitude } | SourceSpec::Random { amplitude } if !amplitude.is_finite() => {
                Err(Error::Config(format!("invalid source {self:?}")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SourceSpec::Zero)
    }

    /// `leader` selects the control pattern, otherwise the target pattern.
    pub fn build(&self, grid: &GridSpec, leader: bool, rng: &mut ChaCha8Rng) -> Trajectory {
        let (lx, ly, horizon) = (grid.lx, grid.ly, grid.horizon);
        match *self {
            SourceSpec::Zero => Trajectory::zeros(grid),
            SourceSpec::Waves { amplitude: a } if leader => Trajectory::from_fn(grid, |t| {
                let s = a * (1.0 + t / horizon);
                VelocityField::from_fn(
                    grid,
                    |x, y| s * (3.0 * x / lx + y / ly).sin(),
                    |x, y| s * (x * y / (lx * ly)).cos(),
                )
            }),
            SourceSpec::Waves { amplitude: a } => Trajectory::from_fn(grid, |t| {
                VelocityField::from_fn(grid, |x, _| 0.5 * a * (t / horizon + x / lx), |_, y| -0.3 * a * y / ly)
            }),
            SourceSpec::Random { amplitude } => Trajectory::random(grid, rng, amplitude),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaddleSection {
    pub probes: usize,
    #[serde(default)]
    pub ascent: AscentOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullcontrolSection {
    /// Penalty levels, strictly decreasing.
    pub epsilons: Vec<f64>,
    /// Power of `tau*` in the target weight of the reported weighted norm.
    pub c0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearSection {
    #[serde(default)]
    pub outer: NonlinearConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationshipSection {
    pub m1: f64,
    pub m2: f64,
    pub epsilon: f64,
    pub t_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegralSection {
    pub m1: f64,
    pub m2: f64,
    pub samples: usize,
    pub modes: usize,
    /// Midpoint time cells, one run per entry.
    pub t_cells: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarlemanSection {
    /// `lambda` values for `F(lambda)`.
    pub f_lambdas: Vec<f64>,
    /// `lambda` values for the pointwise weight inequality.
    pub lambdas: Vec<f64>,
    pub relationship: RelationshipSection,
    pub integral: IntegralSection,
    /// Sample counts for the observability quotient, one run per entry.
    pub observability_samples: Vec<usize>,
    /// Time points of the emitted weight table.
    pub table_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gamma0Section {
    pub ell: f64,
    pub mu: f64,
    /// Strictly ascending disturbance weights.
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub ascent: AscentOptions,
}

/// Order study with the manufactured solution on the unit square; the
/// `grid` and `regions` of the config are not used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub sizes: Vec<usize>,
    pub steps: Vec<usize>,
    pub horizon: f64,
}

/// One experiment run. Only the section named by `experiment` is read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub grid: GridSpec,
    pub regions: RegionsConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub robust: RobustParams,
    #[serde(default)]
    pub carleman: CarlemanParams,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saddle: Option<SaddleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nullcontrol: Option<NullcontrolSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinear: Option<NonlinearSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carleman_check: Option<CarlemanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<Gamma0Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSection>,
}

fn missing(section: &str, experiment: Experiment) -> Error {
    Error::Config(format!("experiment {experiment} needs a [{section}] section"))
}

fn positive_list(name: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() || xs.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Error::Config(format!("{name} must be a non-empty list of positive numbers")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("at `{path}`: {}", e.into_inner().message().trim()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.regions.check_hypotheses(&self.grid)?;
        self.data.y0.validate()?;
        self.data.leader.validate()?;
        self.data.target.validate()?;
        self.robust.validate()?;
        self.penalty.validate()?;
        self.solver.validate()?;
        match self.experiment {
            Experiment::Saddle => {
                self.saddle.as_ref().ok_or_else(|| missing("saddle", self.experiment))?;
            }
            Experiment::Nullcontrol => {
                let s = self.nullcontrol.as_ref().ok_or_else(|| missing("nullcontrol", self.experiment))?;
                positive_list("nullcontrol.epsilons", &s.epsilons)?;
                if s.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
                    return Err(Error::Config("nullcontrol.epsilons must be strictly decreasing".into()));
                }
                if !(s.c0 >= 2.5) {
                    return Err(Error::Config(format!("nullcontrol.c0 must be at least 5/2, got {}", s.c0)));
                }
            }
            Experiment::NullcontrolNonlinear => {
                let s = self.nonlinear.as_ref().ok_or_else(|| missing("nonlinear", self.experiment))?;
                if !(s.outer.outer_tol > 0.0) || s.outer.outer_max == 0 || !(s.outer.delta > 0.0) {
                    return Err(Error::Config("nonlinear.outer needs positive tolerances and bounds".into()));
                }
            }
            Experiment::CarlemanCheck => {
                let s = self
                    .carleman_check
                    .as_ref()
                    .ok_or_else(|| missing("carleman_check", self.experiment))?;
                positive_list("carleman_check.f_lambdas", &s.f_lambdas)?;
                positive_list("carleman_check.lambdas", &s.lambdas)?;
                if s.relationship.t_points == 0 || s.table_points == 0 {
                    return Err(Error::Config("carleman_check needs at least one time point".into()));
                }
                if s.integral.t_cells.is_empty() || s.integral.t_cells.contains(&0) || s.integral.modes == 0 {
                    return Err(Error::Config("carleman_check.integral needs positive t_cells and modes".into()));
                }
                if s.observability_samples.is_empty() || s.observability_samples.contains(&0) {
                    return Err(Error::Config("carleman_check.observability_samples must be positive".into()));
                }
                self.carleman.check_integral_regime()?;
            }
            Experiment::Gamma0Scan => {
                let s = self.gamma0.as_ref().ok_or_else(|| missing("gamma0", self.experiment))?;
                positive_list("gamma0.gammas", &s.gammas)?;
                if s.gammas.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Config("gamma0.gammas must be strictly ascending".into()));
                }
                RobustParams::new(s.ell, s.gammas[0], s.mu)?;
            }
            Experiment::Convergence => {
                let s = self
                    .convergence
                    .as_ref()
                    .ok_or_else(|| missing("convergence", self.experiment))?;
                if s.sizes.len() < 2 || s.sizes.len() != s.steps.len() {
                    return Err(Error::Config(
                        "convergence needs at least two sizes and one step count per size".into(),
                    ));
                }
                for (&n, &nt) in s.sizes.iter().zip(&s.steps) {
                    GridSpec::unit(n, nt, s.horizon)?;
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding, as lowercase hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Generator for one named stream of this run.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Reads, parses and validates a TOML config.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_toml_str(&text)
}

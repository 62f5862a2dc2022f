//! Experiment configuration, orchestration and result files.
//!
//! A run directory holds `manifest.json` (a [`RunRecord`]), CSV tables whose
//! first line is `# config_hash=<sha256>`, and binary field dumps
//! (`*.skfd`, see [`crate::grid_fields::io`]).

mod config;
mod record;
mod run;

pub use config::{
    parse_config, CarlemanSection, ConvergenceSection, DataConfig, Experiment, ExperimentConfig, Gamma0Section,
    InitialState, IntegralSection, NonlinearSection, NullcontrolSection, RegionsConfig, RelationshipSection,
    SaddleSection, SourceSpec,
};
pub use record::{Metrics, RunRecord, MANIFEST};
pub use run::{growth_per_decade, log_log_slope, output_root, run_dir, run_experiment, run_experiment_in, OUT_ENV};

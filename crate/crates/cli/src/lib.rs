//! Batch front-end for the Dirichlet control toolkit: presets, JSON
//! configuration, run orchestration and CSV/VTK output.

pub mod config;
pub mod presets;
pub mod report;
pub mod run;

pub use config::{ConfigError, Domain, LevelRange, Method, RunConfig};
pub use presets::{preset, resolve, Experiment, Mode, PRESETS};
pub use report::Table;
pub use run::{execute, mesh_at, write_artifacts, ArtifactError, RunOutput};

pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, DatumSpec, DomainSpec, ExperimentConfig, FieldSpec, GridSpec};
pub use run::{run, Command, RunError, RunManifest, RunStatus};

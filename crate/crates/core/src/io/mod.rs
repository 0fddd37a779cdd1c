//! Files: trajectory CSV, model and report JSON, TOML configuration.

pub mod config;
pub mod documents;
pub mod trajectory_csv;

pub use config::{DerivativeSource, ExperimentConfig, GameSpec};
pub use documents::{load_json, load_model, save_json, to_json_string, IdentificationReport, ModelDocument};
pub use trajectory_csv::{load_trajectory, read_trajectory, save_trajectory, write_trajectory};

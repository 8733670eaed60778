//! Configuration-driven runner for spectral partition optimization.
//!
//! A run directory holds `config.toml` (the effective configuration),
//! `checkpoint.bin`, `report.json` and `energy.csv`; `classify` and
//! `export` add `classification.json`, `cells/` and `export/`.

pub mod checkpoint;
pub mod classify_cmd;
pub mod config;
pub mod driver;
pub mod error;
pub mod export;
pub mod report;
pub mod rundir;

pub use config::RunConfig;
pub use driver::{execute, resume, run_config, Overrides, RunOutcome};
pub use error::{CliError, CliResult};

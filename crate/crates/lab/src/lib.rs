//! Configuration, file formats and experiment runners for `hypstokes`.
//!
//! The `hypstokes` binary maps one subcommand to each [`ExperimentKind`];
//! [`run`] is the library entry point behind it.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{LabError, Result};
pub use run::{run, run_to_dir};

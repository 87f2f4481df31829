//! Command-line front end: data generation, training runs, method
//! comparisons, timing tables and embedding-file inspection.

pub mod artifact;
pub mod commands;
pub mod config;

pub use artifact::{validate_artifact, RunArtifact};
pub use config::RunConfig;

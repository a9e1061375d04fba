//! IO, file formats, and the command-line driver around `rijepa-core`:
//! dataset parsing, parameter checkpoints with JSON manifests, rule
//! import/export, and the report artifacts every run emits.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod report;
pub mod rules_io;

pub use error::{LabError, Result};

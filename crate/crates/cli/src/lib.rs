//! Batch front end for the shape optimization benchmarks: configuration,
//! problem setup, single runs, method comparisons and derivative checks.

pub mod bench;
pub mod commands;
pub mod config;

pub use commands::{cmd_check_derivative, cmd_compare, cmd_mesh_info, cmd_run};
pub use config::{MuConfig, ProblemKind, RunConfig};

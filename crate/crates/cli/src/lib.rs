//! Experiment harness: single runs, grids, certificates, surfaces and
//! verification of recorded results.

pub mod config;
pub mod error;
pub mod grid;
pub mod run;
pub mod surface;
pub mod verify;

pub use config::{ExperimentConfig, RunRecord};
pub use error::{CliError, CliResult};
pub use grid::{cmd_grid, GridSpec, SelectionReport};
pub use run::{cmd_certify, cmd_train, CertifyOptions};
pub use surface::{cmd_surface, SurfaceGrid};
pub use verify::{cmd_verify, VerifyReport};

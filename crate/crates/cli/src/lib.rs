//! Experiment runner for the `polyfw` learning dynamics.

pub mod config;
pub mod experiment;
pub mod verify;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, Manifest, RunEntry};
pub use verify::{verify_facial_distance, FdRow};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const CONFIG: u8 = 1;
    pub const RUNTIME: u8 = 2;
    pub const VERIFICATION: u8 = 3;
}

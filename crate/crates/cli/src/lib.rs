//! Experiment front door for the incremental Newton / EKF-S solvers:
//! config and file formats, run execution, sweeps and trace verification.
//!
//! The `inewt` binary is a thin wrapper over this library; see the
//! subcommand handlers in `main.rs` for the process-level contracts
//! (exit codes, artifact layout).

pub mod config;
pub mod formats;
pub mod runner;
pub mod verify;

//! Experiment plumbing behind the command-line tool.

pub mod checkpoint;
pub mod config;
pub mod report;
pub mod runner;
pub mod verify;

pub use checkpoint::Checkpoint;
pub use config::{Preset, RunConfig, SEED_ENV};
pub use runner::{resume, run, RunOptions, Summary};

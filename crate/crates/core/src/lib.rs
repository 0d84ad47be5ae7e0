pub mod autodiff;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod nets;
pub mod optim;
pub mod problems;
pub mod quad;
pub mod schedule;
pub mod solver;

pub use error::{Error, Result};

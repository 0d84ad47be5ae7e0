//! Self-describing JSON checkpoint of a run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::nets::NetworkSpec;
use crate::solver::{Multiplier, RunRecord, RunState};

pub const FORMAT: &str = "varconstrain-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: RunConfig,
    pub solution_spec: NetworkSpec,
    pub multiplier_spec: Option<NetworkSpec>,
    /// Parameters, multipliers, Adam moments and counters.
    pub state: RunState,
    pub record: RunRecord,
    /// Seed of the Monte Carlo sample in use; with resampling the sample
    /// seed is this plus the solution step count.
    pub mc_seed: u64,
}

impl Checkpoint {
    pub fn new(config: &RunConfig, state: &RunState, record: &RunRecord) -> Self {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            config: config.clone(),
            solution_spec: config.solution,
            multiplier_spec: match state.multiplier {
                Multiplier::Net { .. } => config.multiplier,
                _ => None,
            },
            state: state.clone(),
            record: record.clone(),
            mc_seed: config.quad.mc_seed,
        }
    }

    /// Refuses files whose version, specs or array lengths disagree.
    pub fn check(&self) -> Result<()> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint {} v{} (expected {FORMAT} v{VERSION})",
                self.format, self.version
            )));
        }
        if self.solution_spec != self.config.solution {
            return Err(Error::Checkpoint(format!(
                "solution spec {} does not match the stored config ({})",
                self.solution_spec, self.config.solution
            )));
        }
        let n = self.solution_spec.param_count();
        if self.state.eta.len() != n || self.state.eta_adam.m.len() != n {
            return Err(Error::Checkpoint(format!(
                "{} needs {n} parameters, checkpoint holds {}",
                self.solution_spec,
                self.state.eta.len()
            )));
        }
        match (&self.state.multiplier, self.multiplier_spec) {
            (Multiplier::Net { params, adam }, Some(spec)) => {
                if Some(spec) != self.config.multiplier {
                    return Err(Error::Checkpoint(
                        "multiplier spec does not match the stored config".into(),
                    ));
                }
                if params.len() != spec.param_count() || adam.m.len() != spec.param_count() {
                    return Err(Error::Checkpoint(format!(
                        "{spec} needs {} parameters, checkpoint holds {}",
                        spec.param_count(),
                        params.len()
                    )));
                }
            }
            (Multiplier::Net { .. }, None) => {
                return Err(Error::Checkpoint("multiplier network without a spec".into()))
            }
            (_, Some(_)) => {
                return Err(Error::Checkpoint("multiplier spec without a network".into()))
            }
            _ => {}
        }
        if self.mc_seed != self.config.quad.mc_seed {
            return Err(Error::Checkpoint("Monte Carlo seed does not match the config".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_vec(self)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let c: Checkpoint = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        c.check()?;
        Ok(c)
    }
}

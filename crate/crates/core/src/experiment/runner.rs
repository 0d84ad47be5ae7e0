//! Runs a configuration end to end and writes its artifacts.
//!
//! Output directory layout: `errors.csv`, `checkpoint.json`, `summary.json`.

use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::ErrorTriple;
use crate::nets::NetworkSpec;
use crate::problems::ProblemName;
use crate::solver::{Method, RecordRow, RunRecord, Solver};

pub const ERRORS_CSV: &str = "errors.csv";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const SUMMARY: &str = "summary.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Save a checkpoint every this many subproblems (0: only at the end).
    pub checkpoint_every: u64,
    /// Stop after this many subproblems in this invocation.
    pub stop_after: Option<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            checkpoint_every: 100,
            stop_after: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub problem: ProblemName,
    pub method: Method,
    pub e: u64,
    pub p: u64,
    pub q: u64,
    pub q_a: u64,
    pub q_b: u64,
    pub solution: NetworkSpec,
    pub solution_params: usize,
    pub multiplier: Option<NetworkSpec>,
    pub subproblems_done: u64,
    pub finished: bool,
    pub steps_eta: u64,
    pub steps_xi: u64,
    pub iterations: u64,
    pub wall_seconds: f64,
    pub eta_seconds: f64,
    pub xi_seconds: f64,
    pub final_errors: Option<ErrorTriple>,
    pub failure: Option<String>,
}

/// Fresh run into `out`.
pub fn run(config: &RunConfig, out: &Path, opts: &RunOptions) -> Result<Summary> {
    let (problem, sc) = config.validate()?;
    std::fs::create_dir_all(out)?;
    info!(
        "{} / {}: E={} P={} Q={} net {} -> {}",
        config.problem,
        config.method,
        config.e,
        config.p,
        config.q(),
        config.solution,
        out.display()
    );
    let solver = Solver::new(problem, sc)?;
    drive(solver, config, out, opts)
}

/// Continues the run stored in `dir`.
pub fn resume(dir: &Path, opts: &RunOptions) -> Result<Summary> {
    let cp = Checkpoint::load(&dir.join(CHECKPOINT))?;
    let (problem, sc) = cp.config.validate()?;
    info!(
        "resuming {} / {} at subproblem {} of {}",
        cp.config.problem, cp.config.method, cp.state.k, cp.config.p
    );
    let solver = Solver::resume(problem, sc, cp.state, cp.record)?;
    drive(solver, &cp.config, dir, opts)
}

fn drive(mut solver: Solver, config: &RunConfig, out: &Path, opts: &RunOptions) -> Result<Summary> {
    let mut done_here = 0;
    while !solver.is_done() && opts.stop_after.is_none_or(|n| done_here < n) {
        if let Err(e) = solver.subproblem() {
            warn!("run aborted: {e}; saving the last good state");
            save(&solver, config, out)?;
            let s = summary(&solver, config, None, Some(e.to_string()));
            write_summary(out, &s)?;
            return Err(e);
        }
        done_here += 1;
        if opts.checkpoint_every > 0 && solver.state.k % opts.checkpoint_every == 0 {
            save(&solver, config, out)?;
        }
    }
    save(&solver, config, out)?;
    let errors = solver.errors()?;
    let s = summary(&solver, config, Some(errors), None);
    write_summary(out, &s)?;
    Ok(s)
}

fn save(solver: &Solver, config: &RunConfig, out: &Path) -> Result<()> {
    Checkpoint::new(config, &solver.state, &solver.record).save(&out.join(CHECKPOINT))?;
    write_errors(&out.join(ERRORS_CSV), &solver.record.rows)
}

fn summary(
    solver: &Solver,
    config: &RunConfig,
    final_errors: Option<ErrorTriple>,
    failure: Option<String>,
) -> Summary {
    let (q_a, q_b) = solver.config.q_split();
    let RunRecord {
        eta_seconds,
        xi_seconds,
        ..
    } = solver.record;
    Summary {
        problem: config.problem,
        method: config.method,
        e: config.e,
        p: config.p,
        q: config.q(),
        q_a,
        q_b,
        solution: config.solution,
        solution_params: config.solution.param_count(),
        multiplier: solver.config.multiplier,
        subproblems_done: solver.state.k,
        finished: solver.is_done(),
        steps_eta: solver.state.steps_eta,
        steps_xi: solver.state.steps_xi,
        iterations: solver.state.iteration,
        wall_seconds: solver.state.wall_seconds,
        eta_seconds,
        xi_seconds,
        final_errors,
        failure,
    }
}

fn write_summary(out: &Path, s: &Summary) -> Result<()> {
    std::fs::write(out.join(SUMMARY), serde_json::to_string_pretty(s)?)?;
    Ok(())
}

pub fn read_summary(dir: &Path) -> Result<Summary> {
    Ok(serde_json::from_slice(&std::fs::read(dir.join(SUMMARY))?)?)
}

pub fn write_errors(path: &Path, rows: &[RecordRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    if rows.is_empty() {
        w.write_record([
            "iteration",
            "wall_time_s",
            "loss",
            "mu",
            "absolute_error",
            "relative_objective_error",
            "constraint_error",
        ])
        .map_err(csv_err)?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_errors(path: &Path) -> Result<Vec<RecordRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize()
        .map(|row| row.map_err(csv_err))
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Default output directory name for a config.
pub fn default_out(config: &RunConfig) -> PathBuf {
    PathBuf::from("runs").join(format!("{}-{}", config.problem, config.method))
}

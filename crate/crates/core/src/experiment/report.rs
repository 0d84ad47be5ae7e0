//! Plot-ready two-column data files from run directories.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::runner::{read_errors, read_summary, ERRORS_CSV};
use crate::error::{Error, Result};
use crate::solver::RecordRow;

/// Per-metric file names written for one run.
pub const SERIES: [&str; 4] = [
    "absolute_error.dat",
    "relative_objective_error.dat",
    "constraint_error.dat",
    "wall_time.dat",
];

fn columns(r: &RecordRow) -> [f64; 4] {
    [
        r.absolute_error,
        r.relative_objective_error,
        r.constraint_error,
        r.wall_time_s,
    ]
}

fn load(dir: &Path) -> Result<Vec<RecordRow>> {
    let path = dir.join(ERRORS_CSV);
    if !path.exists() {
        return Err(Error::Config(format!("{} not found", path.display())));
    }
    read_errors(&path)
}

/// Writes the four `(iteration, value)` files of one run into `out`.
pub fn report(dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let rows = load(dir)?;
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for (i, name) in SERIES.iter().enumerate() {
        let mut s = format!("# iteration {}\n", name.trim_end_matches(".dat"));
        for r in &rows {
            writeln!(s, "{} {:e}", r.iteration, columns(r)[i]).unwrap();
        }
        let path = out.join(name);
        std::fs::write(&path, s)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: PathBuf,
    pub candidate: PathBuf,
    pub wall_baseline: f64,
    pub wall_candidate: f64,
    /// `wall_baseline / wall_candidate`.
    pub speedup: f64,
}

/// Total training seconds of a run: the summary if present, else the last row.
pub fn wall_seconds(dir: &Path) -> Result<f64> {
    if let Ok(s) = read_summary(dir) {
        return Ok(s.wall_seconds);
    }
    load(dir)?
        .last()
        .map(|r| r.wall_time_s)
        .ok_or_else(|| Error::Config(format!("{} has no rows", dir.join(ERRORS_CSV).display())))
}

/// Compares a baseline run (penalty) against a candidate (AL); writes
/// `comparison.dat` with both error and time curves and `speedup.json`.
pub fn compare(baseline: &Path, candidate: &Path, out: &Path) -> Result<Comparison> {
    let a = load(baseline)?;
    let b = load(candidate)?;
    std::fs::create_dir_all(out)?;
    let mut s = String::from(
        "# iteration abs_baseline abs_candidate rel_baseline rel_candidate con_baseline con_candidate wall_baseline wall_candidate\n",
    );
    for ra in &a {
        if let Some(rb) = b.iter().find(|r| r.iteration == ra.iteration) {
            let (ca, cb) = (columns(ra), columns(rb));
            writeln!(
                s,
                "{} {:e} {:e} {:e} {:e} {:e} {:e} {:e} {:e}",
                ra.iteration, ca[0], cb[0], ca[1], cb[1], ca[2], cb[2], ca[3], cb[3]
            )
            .unwrap();
        }
    }
    std::fs::write(out.join("comparison.dat"), s)?;
    let wall_baseline = wall_seconds(baseline)?;
    let wall_candidate = wall_seconds(candidate)?;
    let c = Comparison {
        baseline: baseline.to_path_buf(),
        candidate: candidate.to_path_buf(),
        wall_baseline,
        wall_candidate,
        speedup: wall_baseline / wall_candidate,
    };
    std::fs::write(out.join("speedup.json"), serde_json::to_string_pretty(&c)?)?;
    Ok(c)
}

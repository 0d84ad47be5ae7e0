use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use varconstrain::experiment::{self, report, runner, verify, Preset, RunConfig, RunOptions};
use varconstrain::problems::ProblemName;
use varconstrain::solver::Method;

#[derive(Parser)]
#[command(name = "varconstrain", version, about = "Penalty and augmented Lagrangian training for constrained variational problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write errors.csv, checkpoint.json, summary.json.
    Run(RunArgs),
    /// Continue a run from its checkpoint.
    Resume {
        dir: PathBuf,
        #[command(flatten)]
        opts: OptArgs,
    },
    /// Run the built-in invariant checks.
    Verify,
    /// Write plot data for one run, or a comparison of two runs.
    Report {
        dir: PathBuf,
        /// Second run (AL) to compare against the first (penalty).
        other: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    problem: Option<ProblemName>,
    #[arg(long)]
    method: Option<Method>,
    /// Flat key-value file applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "full")]
    preset: Preset,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides all seeds (also VARCONSTRAIN_SEED).
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    opts: OptArgs,
}

#[derive(Args)]
struct OptArgs {
    /// Checkpoint every this many subproblems (0: only at the end).
    #[arg(long, default_value_t = 100)]
    checkpoint_every: u64,
    /// Stop after this many subproblems; continue later with `resume`.
    #[arg(long)]
    stop_after: Option<u64>,
}

impl OptArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            checkpoint_every: self.checkpoint_every,
            stop_after: self.stop_after,
        }
    }
}

fn build_config(a: &RunArgs) -> Result<RunConfig> {
    let text = match &a.config {
        Some(p) => Some(std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    // The file may name the problem and method; peek at them first so the
    // preset underneath matches.
    let peek = match &text {
        Some(t) => Some(
            RunConfig::preset(a.preset, ProblemName::Geodesic, Method::Penalty).apply_str(t)?,
        ),
        None => None,
    };
    let problem = a
        .problem
        .or(peek.as_ref().map(|c| c.problem))
        .context("--problem is required unless the config file sets `problem`")?;
    let method = a
        .method
        .or(peek.as_ref().map(|c| c.method))
        .context("--method is required unless the config file sets `method`")?;
    let mut c = RunConfig::preset(a.preset, problem, method);
    if let Some(t) = &text {
        c = c.apply_str(t)?;
    }
    c.problem = if a.preset == Preset::Antipodal { ProblemName::Geodesic } else { problem };
    c.method = method;
    c = c.apply_env()?;
    if let Some(s) = a.seed {
        c = c.with_seed(s);
    }
    if let Some(o) = &a.out {
        c.out = Some(o.clone());
    }
    Ok(c)
}

fn print_summary(s: &experiment::Summary, out: &Path) {
    println!("{} / {} -> {}", s.problem, s.method, out.display());
    println!(
        "  subproblems {}/{}  iterations {}  wall {:.2}s",
        s.subproblems_done, s.p, s.iterations, s.wall_seconds
    );
    if let Some(e) = &s.final_errors {
        println!(
            "  absolute {:.4e}  relative objective {:.4e}{}  constraint {:.4e}",
            e.absolute,
            e.relative_objective,
            if e.relative_fallback { " (|f|)" } else { "" },
            e.constraint
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run(a) => {
            let c = build_config(&a)?;
            let out = c.out.clone().unwrap_or_else(|| runner::default_out(&c));
            let s = experiment::run(&c, &out, &a.opts.options())?;
            print_summary(&s, &out);
        }
        Command::Resume { dir, opts } => {
            let s = experiment::resume(&dir, &opts.options())?;
            print_summary(&s, &dir);
        }
        Command::Verify => {
            let checks = verify::run_all();
            let mut failed = 0;
            for c in &checks {
                println!("{} {:<40} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                eprintln!("{failed} check(s) failed");
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Report { dir, other, out } => {
            let out = out.unwrap_or_else(|| dir.clone());
            for p in report::report(&dir, &out)? {
                info!("wrote {}", p.display());
            }
            if let Some(other) = other {
                if !other.is_dir() {
                    bail!("{} is not a run directory", other.display());
                }
                let c = report::compare(&dir, &other, &out)?;
                println!(
                    "speedup {:.3} ({:.2}s / {:.2}s)",
                    c.speedup, c.wall_baseline, c.wall_candidate
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

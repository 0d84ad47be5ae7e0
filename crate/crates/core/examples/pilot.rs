//! Pilot runs on the desk presets.
//!
//! `cargo run --release --example pilot -- <problem> <method> ['key=value;...']`
//! prints every fifth logged row and the timing split. The output in
//! `pilot/` was produced this way.

use std::time::Instant;

use varconstrain::experiment::{Preset, RunConfig};
use varconstrain::problems::ProblemName;
use varconstrain::solver::{Method, Solver};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let problem: ProblemName = args[1].parse().unwrap();
    let method: Method = args[2].parse().unwrap();
    let mut c = RunConfig::preset(Preset::Desk, problem, method);
    if let Some(extra) = args.get(3) {
        c = c.apply_str(&extra.replace(';', "\n")).unwrap();
    }
    let (p, sc) = c.validate().unwrap();
    let mut s = Solver::new(p, sc).unwrap();
    let t = Instant::now();
    s.run().unwrap();
    println!("# {} / {} {} E={} P={}", c.problem, c.method, c.solution, c.e, c.p);
    for r in s.record.rows.iter().step_by(5).chain(s.record.rows.last()) {
        println!(
            "{:>6} {:>8.2} loss {:.3e} abs {:.3e} rel {:.3e} con {:.3e}",
            r.iteration, r.wall_time_s, r.loss, r.absolute_error, r.relative_objective_error, r.constraint_error
        );
    }
    let e = s.errors().unwrap();
    println!("final objective {:.6} (truth {:.6})", e.objective, s.problem.f_true);
    println!(
        "total {:.2}s train {:.2}s eta {:.2}s xi {:.2}s",
        t.elapsed().as_secs_f64(),
        s.state.wall_seconds,
        s.record.eta_seconds,
        s.record.xi_seconds
    );
}

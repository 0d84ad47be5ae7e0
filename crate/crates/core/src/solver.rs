//! Penalty and augmented Lagrangian training loops.
//!
//! Every inner loop warm-starts from the previous subproblem. The iteration
//! counter reported in [`RunRecord`] counts every gradient step, solution and
//! multiplier alike, so subproblem `k` covers iterations
//! `(k−1)Q + 1 ..= kQ` for all three methods.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Jet2, Tape, Var};
use crate::error::{usage, Error, Result};
use crate::metrics::{self, ErrorTriple};
use crate::nets::{Network, NetworkSpec};
use crate::optim::{AdamConfig, AdamState};
use crate::problems::{constant_params, ConstraintValue, Field, Problem, WSpace};
use crate::schedule::{LRSchedule, PenaltySchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "penalty")]
    Penalty,
    #[serde(rename = "al-f")]
    AlFinite,
    #[serde(rename = "al-inf")]
    AlInfinite,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Penalty => "penalty",
            Method::AlFinite => "al-f",
            Method::AlInfinite => "al-inf",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "penalty" | "p" => Ok(Method::Penalty),
            "al-f" | "al_f" => Ok(Method::AlFinite),
            "al-inf" | "al_inf" => Ok(Method::AlInfinite),
            _ => Err(Error::Config(format!(
                "unknown method {s:?}; expected penalty, al-f or al-inf"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    /// Total gradient steps.
    pub e: u64,
    /// Number of subproblems.
    pub p: u64,
    pub penalty: PenaltySchedule,
    pub lr: LRSchedule,
    pub adam: AdamConfig,
    pub solution: NetworkSpec,
    /// Multiplier network (AL_INF only).
    pub multiplier: Option<NetworkSpec>,
    pub solution_seed: u64,
    pub multiplier_seed: u64,
    pub log_every: u64,
    /// Finite multiplier update `λ += g` instead of `λ += μ_k g`.
    pub unscaled_update: bool,
}

impl SolverConfig {
    /// Steps per subproblem, `Q = E / P`.
    pub fn q(&self) -> u64 {
        self.e / self.p
    }

    /// `(Q_A, Q_B)`; both `Q/2` for AL_INF, `(Q, 0)` otherwise.
    pub fn q_split(&self) -> (u64, u64) {
        match self.method {
            Method::AlInfinite => (self.q() / 2, self.q() / 2),
            _ => (self.q(), 0),
        }
    }

    pub fn validate(&self, problem: &Problem) -> Result<()> {
        if self.e == 0 || self.p == 0 || self.e % self.p != 0 {
            return Err(Error::Config(format!(
                "P = {} must divide E = {}",
                self.p, self.e
            )));
        }
        if self.method == Method::AlInfinite && self.q() % 2 != 0 {
            return Err(Error::Config(format!(
                "AL_INF splits Q = {} into two equal halves; Q must be even",
                self.q()
            )));
        }
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be positive".into()));
        }
        self.penalty.validate()?;
        let (s0, t, _) = crate::schedule::derive_lr_params(self.e, self.p, &self.penalty)?;
        if self.lr.s0 != s0 || self.lr.t != t {
            return Err(Error::Config(format!(
                "learning-rate schedule (S0={}, T={}) does not match E and P (S0={s0}, T={t})",
                self.lr.s0, self.lr.t
            )));
        }
        if self.solution.input_dim != problem.input_dim()
            || self.solution.output_dim != problem.output_dim()
        {
            return Err(Error::Config(format!(
                "{} needs a solution network with input {} and output {}, got {}",
                problem.name,
                problem.input_dim(),
                problem.output_dim(),
                self.solution
            )));
        }
        match (self.method, problem.w_space()) {
            (Method::AlFinite, WSpace::BoundaryL2 { .. }) => {
                return Err(Error::Config(format!(
                    "al-f needs a finite-dimensional constraint space; {} has a function-valued one",
                    problem.name
                )))
            }
            (Method::AlInfinite, WSpace::FiniteDim(_)) => {
                return Err(Error::Config(format!(
                    "al-inf needs a function-valued constraint space; {} has a finite one",
                    problem.name
                )))
            }
            _ => {}
        }
        if self.method == Method::AlInfinite {
            let spec = self.multiplier.ok_or_else(|| {
                Error::Config("al-inf needs a multiplier network".into())
            })?;
            let want_in = problem.multiplier_input_dim().unwrap_or(0);
            if spec.input_dim != want_in || spec.output_dim != problem.components() {
                return Err(Error::Config(format!(
                    "{} needs a multiplier network with input {want_in} and output {}, got {spec}",
                    problem.name,
                    problem.components()
                )));
            }
        }
        Ok(())
    }
}

/// Current multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Multiplier {
    None,
    Finite(Vec<f64>),
    Net { params: Vec<f64>, adam: AdamState },
}

/// Everything needed to continue a run bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    /// Completed subproblems.
    pub k: u64,
    pub eta: Vec<f64>,
    pub eta_adam: AdamState,
    pub multiplier: Multiplier,
    pub steps_eta: u64,
    pub steps_xi: u64,
    /// Gradient steps of either kind.
    pub iteration: u64,
    /// Training wall time, metric evaluation excluded.
    pub wall_seconds: f64,
    /// Most recent solution loss; 0 before the first step.
    pub last_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub iteration: u64,
    pub wall_time_s: f64,
    pub loss: f64,
    pub mu: f64,
    pub absolute_error: f64,
    pub relative_objective_error: f64,
    pub constraint_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub rows: Vec<RecordRow>,
    /// Multiplier-fit loss before and after each subproblem's fit (AL_INF).
    pub fit_losses: Vec<(f64, f64)>,
    /// Wall seconds spent in solution steps and in multiplier steps.
    pub eta_seconds: f64,
    pub xi_seconds: f64,
}

/// One training run.
pub struct Solver {
    pub problem: Problem,
    pub config: SolverConfig,
    pub state: RunState,
    pub record: RunRecord,
    tape: Tape,
}

impl Solver {
    pub fn new(problem: Problem, config: SolverConfig) -> Result<Self> {
        config.validate(&problem)?;
        let eta = Network::init(config.solution, config.solution_seed)?.params;
        let eta_adam = AdamState::new(eta.len(), config.adam);
        let multiplier = match config.method {
            Method::Penalty => Multiplier::None,
            Method::AlFinite => match problem.w_space() {
                WSpace::FiniteDim(n) => Multiplier::Finite(vec![0.0; *n]),
                _ => unreachable!("validated"),
            },
            Method::AlInfinite => {
                let spec = config.multiplier.expect("validated");
                let params = Network::init(spec, config.multiplier_seed)?.params;
                let adam = AdamState::new(params.len(), config.adam);
                Multiplier::Net { params, adam }
            }
        };
        Ok(Solver {
            problem,
            config,
            state: RunState {
                k: 0,
                eta,
                eta_adam,
                multiplier,
                steps_eta: 0,
                steps_xi: 0,
                iteration: 0,
                wall_seconds: 0.0,
                last_loss: 0.0,
            },
            record: RunRecord::default(),
            tape: Tape::new(),
        })
    }

    /// Continues from a saved state and record.
    pub fn resume(
        problem: Problem,
        config: SolverConfig,
        state: RunState,
        record: RunRecord,
    ) -> Result<Self> {
        config.validate(&problem)?;
        if state.eta.len() != config.solution.param_count() {
            return Err(Error::Checkpoint(format!(
                "saved solution has {} parameters but {} needs {}",
                state.eta.len(),
                config.solution,
                config.solution.param_count()
            )));
        }
        if let (Multiplier::Net { params, .. }, Some(spec)) = (&state.multiplier, config.multiplier) {
            if params.len() != spec.param_count() {
                return Err(Error::Checkpoint(format!(
                    "saved multiplier has {} parameters but {spec} needs {}",
                    params.len(),
                    spec.param_count()
                )));
            }
        }
        let mut s = Solver {
            problem,
            config,
            state,
            record,
            tape: Tape::new(),
        };
        if s.problem.quad.mc_resample {
            s.problem
                .resample(s.problem.quad.mc_seed.wrapping_add(s.state.steps_eta))?;
        }
        Ok(s)
    }

    pub fn is_done(&self) -> bool {
        self.state.k >= self.config.p
    }

    pub fn solution(&self) -> Network {
        Network {
            spec: self.config.solution,
            params: self.state.eta.clone(),
        }
    }

    pub fn errors(&self) -> Result<ErrorTriple> {
        metrics::evaluate(&self.problem, &self.config.solution, &self.state.eta)
    }

    /// Runs all remaining subproblems.
    pub fn run(&mut self) -> Result<()> {
        while !self.is_done() {
            self.subproblem()?;
        }
        Ok(())
    }

    /// Solves subproblem `k+1`. On failure the state rolls back to the start
    /// of the subproblem.
    pub fn subproblem(&mut self) -> Result<()> {
        if self.is_done() {
            return usage("all subproblems already solved");
        }
        let snapshot = (self.state.clone(), self.record.clone());
        let res = self.subproblem_inner();
        if res.is_err() {
            self.state = snapshot.0;
            self.record = snapshot.1;
        }
        res
    }

    fn subproblem_inner(&mut self) -> Result<()> {
        let k = self.state.k + 1;
        let mu = self.config.penalty.mu(k);
        let (qa, qb) = self.config.q_split();
        // λ at the nodes is fixed while η trains.
        let lambda = self.multiplier_values()?;
        for j in 1..=qa {
            let lr = self.config.lr.delta((k - 1) * qa + j)?;
            let t0 = Instant::now();
            let loss = self.eta_step(mu, lambda.as_deref(), lr)?;
            let dt = t0.elapsed().as_secs_f64();
            self.state.wall_seconds += dt;
            self.record.eta_seconds += dt;
            self.state.last_loss = loss;
            self.after_step(mu)?;
        }
        let t0 = Instant::now();
        match self.config.method {
            Method::Penalty => {}
            Method::AlFinite => {
                let g = self.constraint_values()?;
                let scale = if self.config.unscaled_update { 1.0 } else { mu };
                if let Multiplier::Finite(l) = &mut self.state.multiplier {
                    for (li, gi) in l.iter_mut().zip(&g) {
                        *li += scale * gi;
                    }
                }
                debug!("subproblem {k}: λ = {:?}", self.state.multiplier);
            }
            Method::AlInfinite => {
                let g = self.constraint_values()?;
                let lambda = lambda.expect("AL_INF has multiplier values");
                let targets: Vec<f64> = lambda.iter().zip(&g).map(|(l, gi)| l + mu * gi).collect();
                let dt = t0.elapsed().as_secs_f64();
                self.state.wall_seconds += dt;
                self.record.xi_seconds += dt;
                let mut fit = (f64::NAN, f64::NAN);
                for j in 1..=qb {
                    let lr = self.config.lr.delta((k - 1) * qb + j)?;
                    let t1 = Instant::now();
                    let before = self.xi_step(&targets, lr)?;
                    let dt = t1.elapsed().as_secs_f64();
                    self.state.wall_seconds += dt;
                    self.record.xi_seconds += dt;
                    if j == 1 {
                        fit.0 = before;
                    }
                    self.after_step(mu)?;
                }
                fit.1 = self.fit_loss(&targets)?;
                self.record.fit_losses.push(fit);
                self.state.k = k;
                return Ok(());
            }
        }
        self.state.wall_seconds += t0.elapsed().as_secs_f64();
        self.state.k = k;
        Ok(())
    }

    /// Logs a row when the iteration counter hits a multiple of `log_every`.
    fn after_step(&mut self, mu: f64) -> Result<()> {
        self.state.iteration += 1;
        if self.state.iteration % self.config.log_every != 0 {
            return Ok(());
        }
        let e = self.errors()?;
        let row = RecordRow {
            iteration: self.state.iteration,
            wall_time_s: self.state.wall_seconds,
            loss: self.state.last_loss,
            mu,
            absolute_error: e.absolute,
            relative_objective_error: e.relative_objective,
            constraint_error: e.constraint,
        };
        info!(
            "iter {:>6}  loss {:.4e}  mu {:.1}  abs {:.3e}  rel {:.3e}  con {:.3e}",
            row.iteration,
            row.loss,
            mu,
            row.absolute_error,
            row.relative_objective_error,
            row.constraint_error
        );
        self.record.rows.push(row);
        Ok(())
    }

    /// Builds the subproblem loss on a fresh tape.
    pub fn build_loss(
        problem: &Problem,
        spec: &NetworkSpec,
        tape: &mut Tape,
        params: &[Var],
        mu: f64,
        lambda: Option<&[f64]>,
    ) -> Result<Var> {
        let field = Field::Net { spec, params };
        let f = problem.evaluate_objective(tape, &field)?;
        let cv = problem.evaluate_constraint(tape, &field)?;
        let n2 = problem.w_norm_sq(tape, &cv)?;
        let mut terms = vec![(1.0, f), (0.5 * mu, n2)];
        if let Some(l) = lambda {
            terms.push((1.0, problem.w_pair(tape, l, &cv)?));
        }
        Ok(tape.lincomb(0.0, terms))
    }

    fn eta_step(&mut self, mu: f64, lambda: Option<&[f64]>, lr: f64) -> Result<f64> {
        if self.problem.quad.mc_resample {
            self.problem
                .resample(self.problem.quad.mc_seed.wrapping_add(self.state.steps_eta + 1))?;
        }
        let it = self.state.iteration + 1;
        let tape = &mut self.tape;
        tape.reset();
        let params = tape.vars(&self.state.eta);
        let loss = Self::build_loss(&self.problem, &self.config.solution, tape, &params, mu, lambda)
            .map_err(|e| non_finite(e, it))?;
        if !loss.value().is_finite() {
            return Err(Error::NonFinite {
                iteration: self.state.iteration + 1,
                detail: format!("solution loss is {}", loss.value()),
            });
        }
        let grads = tape.backward(loss, &params)?;
        self.state
            .eta_adam
            .step(&mut self.state.eta, &grads, lr)
            .map_err(|e| non_finite(e, it))?;
        self.state.steps_eta += 1;
        Ok(loss.value())
    }

    /// `g(u_η)` with η held fixed, laid out like the multiplier values.
    pub fn constraint_values(&mut self) -> Result<Vec<f64>> {
        let p = constant_params(&self.state.eta);
        let field = Field::Net {
            spec: &self.config.solution,
            params: &p,
        };
        self.tape.reset();
        let cv: ConstraintValue = self.problem.evaluate_constraint(&mut self.tape, &field)?;
        Ok(cv.values())
    }

    /// Current multiplier at the constraint nodes (or the finite vector).
    pub fn multiplier_values(&self) -> Result<Option<Vec<f64>>> {
        match &self.state.multiplier {
            Multiplier::None => Ok(None),
            Multiplier::Finite(l) => Ok(Some(l.clone())),
            Multiplier::Net { params, .. } => {
                let spec = self.config.multiplier.expect("validated");
                let WSpace::BoundaryL2 { rule, .. } = self.problem.w_space() else {
                    unreachable!("validated");
                };
                let mut out = Vec::with_capacity(rule.len() * spec.output_dim);
                for (x, _) in rule.iter() {
                    out.extend(spec.forward_f64(params, self.problem.multiplier_input(x))?);
                }
                Ok(Some(out))
            }
        }
    }

    fn fit_loss_on(
        problem: &Problem,
        spec: &NetworkSpec,
        tape: &mut Tape,
        params: &[Var],
        targets: &[f64],
    ) -> Result<Var> {
        let WSpace::BoundaryL2 { rule, components } = problem.w_space() else {
            return usage("multiplier fit needs a function-valued constraint space");
        };
        let mut terms = Vec::with_capacity(targets.len());
        for (i, (x, w)) in rule.iter().enumerate() {
            let input = Jet2::lift_point(problem.multiplier_input(x), 0);
            let out = spec.forward(tape, params, &input)?;
            for c in 0..*components {
                let r = tape.lincomb(-targets[i * components + c], [(1.0, out[c].var())]);
                terms.push((w, tape.square(r)));
            }
        }
        Ok(tape.lincomb(0.0, terms))
    }

    /// `|λ_ξ − targets|²_W` at the current ξ.
    pub fn fit_loss(&mut self, targets: &[f64]) -> Result<f64> {
        let Multiplier::Net { params, .. } = &self.state.multiplier else {
            return usage("no multiplier network");
        };
        let p = constant_params(params);
        self.tape.reset();
        let spec = self.config.multiplier.expect("validated");
        Ok(Self::fit_loss_on(&self.problem, &spec, &mut self.tape, &p, targets)?.value())
    }

    /// `steps` multiplier-fit updates toward fixed node targets outside the
    /// training loop (no logging, no wall-time accounting). Returns the fit
    /// loss before and after.
    pub fn multiplier_fit(
        &mut self,
        targets: &[f64],
        steps: u64,
        lr: impl Fn(u64) -> f64,
    ) -> Result<(f64, f64)> {
        if !targets.iter().all(|t| t.is_finite()) {
            return usage("multiplier-fit targets must be finite");
        }
        let before = self.fit_loss(targets)?;
        for j in 1..=steps {
            self.xi_step(targets, lr(j))?;
        }
        Ok((before, self.fit_loss(targets)?))
    }

    /// One multiplier-fit step; returns the loss before the update.
    fn xi_step(&mut self, targets: &[f64], lr: f64) -> Result<f64> {
        let spec = self.config.multiplier.expect("validated");
        let iteration = self.state.iteration + 1;
        let Multiplier::Net { params, adam } = &mut self.state.multiplier else {
            return usage("no multiplier network");
        };
        let tape = &mut self.tape;
        tape.reset();
        let vars = tape.vars(params);
        let loss = Self::fit_loss_on(&self.problem, &spec, tape, &vars, targets)?;
        if !loss.value().is_finite() {
            return Err(Error::NonFinite {
                iteration,
                detail: format!("multiplier fit loss is {}", loss.value()),
            });
        }
        let grads = tape.backward(loss, &vars)?;
        adam.step(params, &grads, lr).map_err(|e| non_finite(e, iteration))?;
        self.state.steps_xi += 1;
        Ok(loss.value())
    }
}

fn non_finite(e: Error, iteration: u64) -> Error {
    match e {
        Error::Numeric(detail) | Error::Domain(detail) | Error::Singularity(detail) => {
            Error::NonFinite { iteration, detail }
        }
        Error::NonFinite { detail, .. } => Error::NonFinite { iteration, detail },
        other => other,
    }
}

/// `steps` Adam updates of `params` on an arbitrary loss, with learning rate
/// `lr(t)` for `t = 1..=steps`.
pub fn subproblem_descent(
    params: &mut [f64],
    adam: &mut AdamState,
    steps: u64,
    mut lr: impl FnMut(u64) -> Result<f64>,
    mut loss: impl FnMut(&mut Tape, &[Var]) -> Result<Var>,
) -> Result<f64> {
    let mut tape = Tape::new();
    let mut last = f64::NAN;
    for t in 1..=steps {
        tape.reset();
        let vars = tape.vars(params);
        let l = loss(&mut tape, &vars)?;
        if !l.value().is_finite() {
            return Err(Error::NonFinite {
                iteration: t,
                detail: format!("loss is {}", l.value()),
            });
        }
        let g = tape.backward(l, &vars)?;
        adam.step(params, &g, lr(t)?)?;
        last = l.value();
    }
    Ok(last)
}

//! Run configuration: presets, flat key-value files and validation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nets::NetworkSpec;
use crate::optim::AdamConfig;
use crate::problems::{GeodesicEnds, Problem, ProblemName, QuadConfig};
use crate::schedule::{LRSchedule, PenaltySchedule};
use crate::solver::{Method, SolverConfig};

/// Overrides every seed in the config when set.
pub const SEED_ENV: &str = "VARCONSTRAIN_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Full-size networks and step counts.
    Full,
    /// Same schedules, small networks and coarse rules.
    Desk,
    /// Desk geodesic network with antipodal endpoints and the full step count.
    Antipodal,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Preset::Full),
            "desk" => Ok(Preset::Desk),
            "antipodal" => Ok(Preset::Antipodal),
            _ => Err(Error::Config(format!(
                "unknown preset {s:?}; expected full, desk or antipodal"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemName,
    pub method: Method,
    pub e: u64,
    pub p: u64,
    pub penalty: PenaltySchedule,
    pub lr_l0: f64,
    pub lr_d0: f64,
    pub lr_l1: Option<f64>,
    pub lr_d1: Option<f64>,
    pub adam: AdamConfig,
    pub quad: QuadConfig,
    pub geodesic: GeodesicEnds,
    pub solution: NetworkSpec,
    pub multiplier: Option<NetworkSpec>,
    pub solution_seed: u64,
    pub multiplier_seed: u64,
    pub log_every: u64,
    pub unscaled_update: bool,
    /// Overrides the problem's constraint-error divisor.
    pub z_norm: Option<f64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn preset(preset: Preset, problem: ProblemName, method: Method) -> RunConfig {
        let mut c = full_size(problem, method);
        match preset {
            Preset::Full => {}
            Preset::Desk => desk(&mut c),
            Preset::Antipodal => {
                c.problem = ProblemName::Geodesic;
                c = full_size(ProblemName::Geodesic, method);
                desk(&mut c);
                c.e = 50000;
                c.p = 2500;
                c.geodesic = GeodesicEnds::ANTIPODAL;
            }
        }
        c
    }

    pub fn q(&self) -> u64 {
        if self.p == 0 {
            0
        } else {
            self.e / self.p
        }
    }

    pub fn lr(&self) -> Result<LRSchedule> {
        LRSchedule::from_rates(
            self.lr_l0,
            self.lr_d0,
            self.lr_l1,
            self.lr_d1,
            self.e,
            self.p,
            &self.penalty,
        )
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let mut p = Problem::build(self.problem, &self.quad, self.geodesic)?;
        if let Some(z) = self.z_norm {
            if !(z > 0.0) {
                return Err(Error::Config(format!("problem.z_norm must be positive, got {z}")));
            }
            p.z_norm = z;
        }
        Ok(p)
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        Ok(SolverConfig {
            method: self.method,
            e: self.e,
            p: self.p,
            penalty: self.penalty,
            lr: self.lr()?,
            adam: self.adam,
            solution: self.solution,
            multiplier: if self.method == Method::AlInfinite {
                self.multiplier
            } else {
                None
            },
            solution_seed: self.solution_seed,
            multiplier_seed: self.multiplier_seed,
            log_every: self.log_every,
            unscaled_update: self.unscaled_update,
        })
    }

    /// Full validation: schedules, divisibility, network shapes, method fit.
    pub fn validate(&self) -> Result<(Problem, SolverConfig)> {
        if self.p == 0 || self.e % self.p != 0 {
            return Err(Error::Config(format!("P = {} must divide E = {}", self.p, self.e)));
        }
        self.solution.validate()?;
        if let Some(m) = self.multiplier {
            m.validate()?;
        }
        let problem = self.build_problem()?;
        let sc = self.solver_config()?;
        sc.validate(&problem)?;
        Ok((problem, sc))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.solution_seed = seed;
        self.multiplier_seed = seed.wrapping_add(1);
        self.quad.mc_seed = seed.wrapping_add(2);
        self
    }

    /// Applies `VARCONSTRAIN_SEED` if present.
    pub fn apply_env(self) -> Result<Self> {
        match std::env::var(SEED_ENV) {
            Ok(s) => {
                let seed = s.trim().parse::<u64>().map_err(|_| {
                    Error::Config(format!("{SEED_ENV}={s:?} is not an unsigned integer"))
                })?;
                Ok(self.with_seed(seed))
            }
            Err(_) => Ok(self),
        }
    }

    /// Reads a flat key-value file on top of `self`.
    pub fn apply_file(self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        self.apply_str(&text)
    }

    pub fn apply_str(mut self, text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        let mut flat = BTreeMap::new();
        flatten("", &table, &mut flat);
        // Problem and method first so later keys see the right defaults.
        for key in ["problem", "method"] {
            if let Some(v) = flat.remove(key) {
                self.set(key, &v)?;
            }
        }
        let q = flat.remove("Q");
        for (k, v) in &flat {
            self.set(k, v)?;
        }
        if let Some(q) = q {
            let q = as_u64("Q", &q)?;
            if q * self.p != self.e {
                return Err(Error::Config(format!(
                    "Q = {q} is inconsistent with E = {} and P = {}",
                    self.e, self.p
                )));
            }
        }
        Ok(self)
    }

    pub fn set(&mut self, key: &str, v: &toml::Value) -> Result<()> {
        match key {
            "problem" => self.problem = as_str(key, v)?.parse()?,
            "method" => self.method = as_str(key, v)?.parse()?,
            "E" => self.e = as_u64(key, v)?,
            "P" => self.p = as_u64(key, v)?,
            "penalty.mu1" => self.penalty.mu1 = as_f64(key, v)?,
            "penalty.r" => self.penalty.r = as_f64(key, v)?,
            "penalty.mu_max" => self.penalty.mu_max = as_f64(key, v)?,
            "lr.L0" => self.lr_l0 = as_f64(key, v)?,
            "lr.D0" => self.lr_d0 = as_f64(key, v)?,
            "lr.L1" => self.lr_l1 = Some(as_f64(key, v)?),
            "lr.D1" => self.lr_d1 = Some(as_f64(key, v)?),
            "adam.beta1" => self.adam.beta1 = as_f64(key, v)?,
            "adam.beta2" => self.adam.beta2 = as_f64(key, v)?,
            "adam.eps" => self.adam.eps = as_f64(key, v)?,
            "quad.n1d" => self.quad.n1d = as_u64(key, v)? as usize,
            "quad.n2d" => self.quad.n2d = as_u64(key, v)? as usize,
            "quad.nface" => self.quad.nface = as_u64(key, v)? as usize,
            "quad.mc_points" => self.quad.mc_points = as_u64(key, v)? as usize,
            "quad.mc_seed" => self.quad.mc_seed = as_u64(key, v)?,
            "quad.mc_resample" => self.quad.mc_resample = as_bool(key, v)?,
            "quad.error_n3d" => self.quad.error_n3d = as_u64(key, v)? as usize,
            "geodesic.theta0" => self.geodesic.theta0 = as_f64(key, v)?,
            "geodesic.phi0" => self.geodesic.phi0 = as_f64(key, v)?,
            "geodesic.theta1" => self.geodesic.theta1 = as_f64(key, v)?,
            "geodesic.phi1" => self.geodesic.phi1 = as_f64(key, v)?,
            "net.solution" => self.solution = as_str(key, v)?.parse()?,
            "net.multiplier" => self.multiplier = Some(as_str(key, v)?.parse()?),
            "seed" => *self = self.clone().with_seed(as_u64(key, v)?),
            "seed.solution" => self.solution_seed = as_u64(key, v)?,
            "seed.multiplier" => self.multiplier_seed = as_u64(key, v)?,
            "log_every" => self.log_every = as_u64(key, v)?,
            "al.unscaled_update" => self.unscaled_update = as_bool(key, v)?,
            "problem.z_norm" => self.z_norm = Some(as_f64(key, v)?),
            "out" => self.out = Some(PathBuf::from(as_str(key, v)?)),
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }
}

fn flatten(prefix: &str, t: &toml::Table, out: &mut BTreeMap<String, toml::Value>) {
    for (k, v) in t {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            // `seed = 3` and `seed.solution = 3` cannot coexist in TOML, so a
            // `seed` table is flattened like any other.
            toml::Value::Table(sub) => flatten(&key, sub, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

fn as_f64(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::Config(format!("{key} expects a number, got {v}"))),
    }
}

fn as_u64(key: &str, v: &toml::Value) -> Result<u64> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(Error::Config(format!("{key} expects a non-negative integer, got {v}"))),
    }
}

fn as_bool(key: &str, v: &toml::Value) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| Error::Config(format!("{key} expects true or false, got {v}")))
}

fn as_str<'a>(key: &str, v: &'a toml::Value) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| Error::Config(format!("{key} expects a string, got {v}")))
}

/// Full-size networks, schedules and step counts.
fn full_size(problem: ProblemName, method: Method) -> RunConfig {
    let base = |e, p, mu_max, l0, d0, l1, d1, sol, mul| RunConfig {
        problem,
        method,
        e,
        p,
        penalty: PenaltySchedule {
            mu1: 100.0,
            r: 1.01,
            mu_max,
        },
        lr_l0: l0,
        lr_d0: d0,
        lr_l1: l1,
        lr_d1: d1,
        adam: AdamConfig::default(),
        quad: QuadConfig::default(),
        geodesic: GeodesicEnds::DEFAULT,
        solution: sol,
        multiplier: mul,
        solution_seed: 1,
        multiplier_seed: 2,
        log_every: 100,
        unscaled_update: false,
        z_norm: None,
        out: None,
    };
    match problem {
        ProblemName::MinimalSurface => {
            let d0 = if method == Method::Penalty { 1e-1 } else { 2e-1 };
            base(
                20000,
                1000,
                5000.0,
                1e-4,
                d0,
                None,
                None,
                NetworkSpec::ff(50, 3, 2, 1),
                Some(NetworkSpec::ff(50, 3, 1, 1)),
            )
        }
        ProblemName::Geodesic => base(
            50000,
            2500,
            500.0,
            1e-3,
            1e-1,
            Some(1e-4),
            Some(1e-2),
            NetworkSpec::lstm(50, 3, 1, 1),
            None,
        ),
        ProblemName::GradShafranov => base(
            50000,
            2500,
            1000.0,
            1e-4,
            1e-1,
            Some(1e-6),
            Some(1e-2),
            NetworkSpec::lstm(50, 3, 2, 1),
            Some(NetworkSpec::ff(50, 3, 2, 1)),
        ),
        ProblemName::Beltrami => base(
            50000,
            2500,
            5000.0,
            1e-4,
            1e-1,
            None,
            None,
            NetworkSpec::lstm(50, 3, 3, 3),
            Some(NetworkSpec::ff(50, 3, 3, 3)),
        ),
    }
}

/// Desk scale keeps Q = 20 and the penalty schedules; networks, node counts
/// and `E` shrink. The geodesic keeps its full-size learning rate, the others
/// start at `L0 = 1e-2` so that 4000 steps make visible progress.
fn desk(c: &mut RunConfig) {
    match c.problem {
        ProblemName::MinimalSurface => {
            c.e = 4000;
            c.p = 200;
            c.solution = NetworkSpec::ff(12, 2, 2, 1);
            c.multiplier = Some(NetworkSpec::ff(8, 2, 1, 1));
            c.quad.n1d = 16;
            c.quad.n2d = 10;
            c.lr_l0 = 1e-2;
        }
        ProblemName::Geodesic => {
            c.e = 5000;
            c.p = 250;
            c.solution = NetworkSpec::lstm(10, 2, 1, 1);
            c.quad.n1d = 24;
        }
        ProblemName::GradShafranov => {
            c.e = 4000;
            c.p = 200;
            c.solution = NetworkSpec::lstm(8, 2, 2, 1);
            c.multiplier = Some(NetworkSpec::ff(8, 2, 2, 1));
            c.quad.n1d = 8;
            c.quad.n2d = 10;
            c.lr_l0 = 1e-2;
        }
        ProblemName::Beltrami => {
            c.e = 2000;
            c.p = 100;
            c.solution = NetworkSpec::lstm(8, 2, 3, 3);
            c.multiplier = Some(NetworkSpec::ff(8, 2, 3, 3));
            c.quad.nface = 4;
            c.quad.mc_points = 100;
            c.quad.error_n3d = 8;
            c.lr_l0 = 1e-2;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_presets() {
        let c = RunConfig::preset(Preset::Full, ProblemName::Geodesic, Method::Penalty);
        assert_eq!((c.e, c.p, c.q()), (50000, 2500, 20));
        assert_eq!(c.solution.param_count(), 21051);
        assert_eq!(c.lr().unwrap().t, 15841);
        let ms = RunConfig::preset(Preset::Full, ProblemName::MinimalSurface, Method::AlInfinite);
        let sc = ms.solver_config().unwrap();
        assert_eq!(sc.q_split(), (10, 10));
        assert_eq!(ms.lr_d0, 2e-1);
        assert_eq!(ms.lr().unwrap().t, 194059);
        let gs = RunConfig::preset(Preset::Full, ProblemName::GradShafranov, Method::Penalty);
        assert_eq!(gs.solution.param_count(), 21851);
        assert_eq!(gs.lr().unwrap().t, 35643);
        for name in ProblemName::ALL {
            for m in [Method::Penalty, Method::AlInfinite, Method::AlFinite] {
                let geo = name == ProblemName::Geodesic;
                let want = match m {
                    Method::Penalty => true,
                    Method::AlFinite => geo,
                    Method::AlInfinite => !geo,
                };
                let ok = RunConfig::preset(Preset::Full, name, m).validate().is_ok();
                assert_eq!(ok, want, "{name} {m}");
            }
        }
    }

    #[test]
    fn desk_presets_validate() {
        for name in ProblemName::ALL {
            let c = RunConfig::preset(Preset::Desk, name, Method::Penalty);
            assert_eq!(c.q(), 20);
            c.validate().unwrap();
        }
        let a = RunConfig::preset(Preset::Antipodal, ProblemName::MinimalSurface, Method::AlFinite);
        assert_eq!(a.problem, ProblemName::Geodesic);
        assert_eq!(a.geodesic, GeodesicEnds::ANTIPODAL);
        a.validate().unwrap();
    }

    #[test]
    fn flat_file_overrides() {
        let base = RunConfig::preset(Preset::Desk, ProblemName::Geodesic, Method::Penalty);
        let text = r#"
            method = "al-f"
            E = 400
            P = 20
            Q = 20
            penalty.mu_max = 300
            "lr.L0" = 0.002
            net.solution = "LSTM(4, 1, 1, 1)"
            seed.solution = 11
            quad.mc_resample = true
        "#;
        let c = base.apply_str(text).unwrap();
        assert_eq!(c.method, Method::AlFinite);
        assert_eq!((c.e, c.p), (400, 20));
        assert_eq!(c.penalty.mu_max, 300.0);
        assert_eq!(c.lr_l0, 0.002);
        assert_eq!(c.solution, NetworkSpec::lstm(4, 1, 1, 1));
        assert_eq!(c.solution_seed, 11);
        assert!(c.quad.mc_resample);
        c.validate().unwrap();
    }

    #[test]
    fn bad_configs_rejected() {
        let base = RunConfig::preset(Preset::Desk, ProblemName::Geodesic, Method::Penalty);
        assert!(base.clone().apply_str("bogus = 1").is_err());
        assert!(base.clone().apply_str("E = \"many\"").is_err());
        assert!(base.clone().apply_str("E = 400\nP = 20\nQ = 25").is_err());
        let c = base.clone().apply_str("P = 7").unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let gs = RunConfig::preset(Preset::Desk, ProblemName::GradShafranov, Method::AlInfinite)
            .apply_str("E = 300\nP = 20")
            .unwrap();
        assert!(matches!(gs.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn seed_override() {
        let c = RunConfig::preset(Preset::Desk, ProblemName::Beltrami, Method::Penalty).with_seed(40);
        assert_eq!((c.solution_seed, c.multiplier_seed, c.quad.mc_seed), (40, 41, 42));
    }
}

//! Constrained variational benchmarks: objective `f`, constraint `g`, the
//! constraint space `W`, a truth oracle and the normalisation `Z`.

mod beltrami;
mod geodesic;
mod grad_shafranov;
mod minimal_surface;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use beltrami::beltrami_field;
pub use geodesic::{GeodesicEnds, GeodesicTruth};
pub use grad_shafranov::{GsConstants, GS_DEFAULT};

use crate::autodiff::{curl, Jet2, Tape, Var};
use crate::error::{usage, Error, Result};
use crate::nets::NetworkSpec;
use crate::quad::{self, Domain, PointRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemName {
    MinimalSurface,
    Geodesic,
    GradShafranov,
    Beltrami,
}

impl ProblemName {
    pub const ALL: [ProblemName; 4] = [
        ProblemName::MinimalSurface,
        ProblemName::Geodesic,
        ProblemName::GradShafranov,
        ProblemName::Beltrami,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemName::MinimalSurface => "minimal-surface",
            ProblemName::Geodesic => "geodesic",
            ProblemName::GradShafranov => "grad-shafranov",
            ProblemName::Beltrami => "beltrami",
        }
    }
}

impl fmt::Display for ProblemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown problem {s:?}; expected minimal-surface, geodesic, grad-shafranov or beltrami"
                ))
            })
    }
}

/// Node counts and Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    /// 1D objectives and per-edge boundary rules.
    pub n1d: usize,
    /// Per-axis count for 2D objectives.
    pub n2d: usize,
    /// Per-axis count on each cube face.
    pub nface: usize,
    pub mc_points: usize,
    pub mc_seed: u64,
    /// Draw a fresh Monte Carlo sample before every solution step.
    pub mc_resample: bool,
    /// Per-axis count of the 3D rule used for error reporting.
    pub error_n3d: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            n1d: 64,
            n2d: 32,
            nface: 16,
            mc_points: 1000,
            mc_seed: 7,
            mc_resample: false,
            error_n3d: 16,
        }
    }
}

/// The constraint space.
#[derive(Debug, Clone, PartialEq)]
pub enum WSpace {
    /// Euclidean `R^n`.
    FiniteDim(usize),
    /// `L²` over boundary nodes with `components` values per node.
    BoundaryL2 { rule: PointRule, components: usize },
}

/// `g(u)` on the tape.
#[derive(Debug, Clone)]
pub enum ConstraintValue {
    Finite(Vec<Var>),
    /// Node-major values: `values[i * components + c]`.
    Boundary { values: Vec<Var>, components: usize },
}

impl ConstraintValue {
    pub fn vars(&self) -> &[Var] {
        match self {
            ConstraintValue::Finite(v) => v,
            ConstraintValue::Boundary { values, .. } => values,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.vars().iter().map(Var::value).collect()
    }
}

/// What to evaluate `u` from.
pub enum Field<'a> {
    /// A network through the problem's solution map.
    Net {
        spec: &'a NetworkSpec,
        params: &'a [Var],
    },
    /// The closed-form solution.
    Truth,
    /// An arbitrary jet map from lifted inputs to `u` (solution map not applied).
    Custom(&'a dyn Fn(&mut Tape, &[Jet2]) -> Result<Vec<Jet2>>),
}

#[derive(Debug, Clone)]
enum Kind {
    MinimalSurface,
    Geodesic(GeodesicTruth),
    GradShafranov(GsConstants),
    Beltrami,
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub name: ProblemName,
    pub domain: Domain,
    kind: Kind,
    interior: PointRule,
    error_rule: PointRule,
    w_space: WSpace,
    /// Constraint error divisor.
    pub z_norm: f64,
    /// `f(u_true)`.
    pub f_true: f64,
    /// Jet order the objective integrand reads.
    pub order: u8,
    /// When false, `g` is identically zero.
    pub constrained: bool,
    pub quad: QuadConfig,
}

pub fn make_minimal_surface(q: &QuadConfig) -> Result<Problem> {
    let domain = Domain::Rectangle {
        lo: [0.0, -2.0 * PI],
        hi: [1.0, 2.0 * PI],
    };
    let interior = quad::interior_rule(&domain, q.n2d)?;
    let rule = quad::segment_rule(&[1.0, -2.0 * PI], &[1.0, 2.0 * PI], q.n1d)?;
    Ok(Problem {
        name: ProblemName::MinimalSurface,
        domain,
        kind: Kind::MinimalSurface,
        error_rule: interior.clone(),
        interior,
        w_space: WSpace::BoundaryL2 {
            rule,
            components: 1,
        },
        z_norm: (4.0 * PI).sqrt(),
        f_true: minimal_surface::F_TRUE,
        order: 1,
        constrained: true,
        quad: *q,
    })
}

pub fn make_geodesic(ends: GeodesicEnds, q: &QuadConfig) -> Result<Problem> {
    let truth = GeodesicTruth::new(ends)?;
    let domain = Domain::Interval {
        a: ends.theta0,
        b: ends.theta1,
    };
    let interior = quad::gauss_legendre(q.n1d, ends.theta0, ends.theta1)?.to_points();
    Ok(Problem {
        name: ProblemName::Geodesic,
        domain,
        f_true: truth.central_angle,
        kind: Kind::Geodesic(truth),
        error_rule: interior.clone(),
        interior,
        w_space: WSpace::FiniteDim(1),
        z_norm: 1.0,
        order: 1,
        constrained: true,
        quad: *q,
    })
}

pub fn make_grad_shafranov(q: &QuadConfig) -> Result<Problem> {
    let c = GS_DEFAULT;
    let domain = c.domain();
    let interior = quad::interior_rule(&domain, q.n2d)?;
    let rule = quad::boundary_rule(&domain, q.n1d)?;
    let perimeter = rule.total_weight();
    Ok(Problem {
        name: ProblemName::GradShafranov,
        domain,
        kind: Kind::GradShafranov(c),
        error_rule: interior.clone(),
        interior,
        w_space: WSpace::BoundaryL2 {
            rule,
            components: 1,
        },
        z_norm: perimeter.sqrt(),
        f_true: 0.0,
        order: 2,
        constrained: true,
        quad: *q,
    })
}

pub fn make_beltrami(q: &QuadConfig) -> Result<Problem> {
    let domain = Domain::Box {
        lo: [-0.5; 3],
        hi: [0.5; 3],
    };
    let interior = quad::mc_sample([-0.5; 3], [0.5; 3], q.mc_points, q.mc_seed)?.to_points();
    let error_rule = quad::interior_rule(&domain, q.error_n3d)?;
    let rule = quad::boundary_rule(&domain, q.nface)?;
    Ok(Problem {
        name: ProblemName::Beltrami,
        domain,
        kind: Kind::Beltrami,
        interior,
        error_rule,
        w_space: WSpace::BoundaryL2 {
            rule,
            components: 3,
        },
        z_norm: 6f64.sqrt(),
        f_true: 1.5,
        order: 0,
        constrained: true,
        quad: *q,
    })
}

impl Problem {
    pub fn build(name: ProblemName, q: &QuadConfig, ends: GeodesicEnds) -> Result<Self> {
        match name {
            ProblemName::MinimalSurface => make_minimal_surface(q),
            ProblemName::Geodesic => make_geodesic(ends, q),
            ProblemName::GradShafranov => make_grad_shafranov(q),
            ProblemName::Beltrami => make_beltrami(q),
        }
    }

    pub fn interior(&self) -> &PointRule {
        &self.interior
    }

    pub fn error_rule(&self) -> &PointRule {
        &self.error_rule
    }

    pub fn w_space(&self) -> &WSpace {
        &self.w_space
    }

    pub fn geodesic_truth(&self) -> Option<&GeodesicTruth> {
        match &self.kind {
            Kind::Geodesic(t) => Some(t),
            _ => None,
        }
    }

    /// Input dimension of the solution network.
    pub fn input_dim(&self) -> usize {
        self.domain.dim()
    }

    /// Output dimension of the solution network (the potential for Beltrami).
    pub fn output_dim(&self) -> usize {
        match self.kind {
            Kind::Beltrami => 3,
            _ => 1,
        }
    }

    /// Components of `u` and of `g` at each boundary node.
    pub fn components(&self) -> usize {
        self.output_dim()
    }

    /// Input dimension of a multiplier network (`None` for finite `W`).
    pub fn multiplier_input_dim(&self) -> Option<usize> {
        match self.kind {
            Kind::Geodesic(_) => None,
            Kind::MinimalSurface => Some(1),
            _ => Some(self.input_dim()),
        }
    }

    /// Maps a boundary node to the multiplier network input. The minimal
    /// surface constraint lives on `r = 1`, so only `θ` is fed.
    pub fn multiplier_input<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        match self.kind {
            Kind::MinimalSurface => &x[1..2],
            _ => x,
        }
    }

    /// Draws a fresh Monte Carlo sample (Beltrami only; no-op otherwise).
    pub fn resample(&mut self, seed: u64) -> Result<()> {
        if let Kind::Beltrami = self.kind {
            self.interior =
                quad::mc_sample([-0.5; 3], [0.5; 3], self.quad.mc_points, seed)?.to_points();
        }
        Ok(())
    }

    /// `u` and its spatial derivatives up to `order` at `x`.
    pub fn field(&self, tape: &mut Tape, f: &Field, x: &[f64], order: u8) -> Result<Vec<Jet2>> {
        match f {
            Field::Net { spec, params } => {
                if spec.input_dim != self.input_dim() || spec.output_dim != self.output_dim() {
                    return usage(format!(
                        "{} needs a network with input {} and output {}, got {spec}",
                        self.name,
                        self.input_dim(),
                        self.output_dim()
                    ));
                }
                match self.kind {
                    Kind::Beltrami => {
                        let h = spec.forward(tape, params, &Jet2::lift_point(x, order + 1))?;
                        curl(tape, &h)
                    }
                    _ => spec.forward(tape, params, &Jet2::lift_point(x, order)),
                }
            }
            Field::Truth => self.truth_jets(tape, &Jet2::lift_point(x, order)),
            Field::Custom(g) => g(tape, &Jet2::lift_point(x, order)),
        }
    }

    /// The closed-form solution on jets.
    pub fn truth_jets(&self, tape: &mut Tape, x: &[Jet2]) -> Result<Vec<Jet2>> {
        match &self.kind {
            Kind::MinimalSurface => Ok(vec![x[1]]),
            Kind::Geodesic(t) => Ok(vec![t.jet(tape, &x[0])?]),
            Kind::GradShafranov(c) => Ok(vec![c.solovev_jet(tape, x)?]),
            Kind::Beltrami => Ok(beltrami_field(tape, x).to_vec()),
        }
    }

    /// Pointwise truth values.
    pub fn truth(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut scratch = Tape::new();
        let u = self.truth_jets(&mut scratch, &Jet2::lift_point(x, 0))?;
        Ok(u.iter().map(Jet2::value).collect())
    }

    fn integrand(&self, tape: &mut Tape, x: &[f64], u: &[Jet2]) -> Result<Var> {
        match &self.kind {
            Kind::MinimalSurface => minimal_surface::integrand(tape, x, &u[0]),
            Kind::Geodesic(_) => geodesic::integrand(tape, x, &u[0]),
            Kind::GradShafranov(c) => c.integrand(tape, x, &u[0]),
            Kind::Beltrami => Ok(beltrami::integrand(tape, u)),
        }
    }

    /// `f` over an arbitrary rule.
    pub fn objective_on(&self, tape: &mut Tape, rule: &PointRule, f: &Field) -> Result<Var> {
        rule.integrate_var(tape, |tape, x| {
            let u = self.field(tape, f, x, self.order)?;
            self.integrand(tape, x, &u)
        })
    }

    /// `f(u)` with the objective rule, differentiable through `f`'s Vars.
    pub fn evaluate_objective(&self, tape: &mut Tape, f: &Field) -> Result<Var> {
        self.objective_on(tape, &self.interior, f)
    }

    pub fn evaluate_constraint(&self, tape: &mut Tape, f: &Field) -> Result<ConstraintValue> {
        if let Kind::Geodesic(t) = &self.kind {
            let g = if self.constrained {
                let u0 = self.field(tape, f, &[t.ends.theta0], 0)?[0].var();
                let u1 = self.field(tape, f, &[t.ends.theta1], 0)?[0].var();
                geodesic::constraint(tape, &t.ends, u0, u1)?
            } else {
                Var::constant(0.0)
            };
            return Ok(ConstraintValue::Finite(vec![g]));
        }
        let WSpace::BoundaryL2 { rule, components } = &self.w_space else {
            unreachable!("only the geodesic has a finite constraint space");
        };
        let mut values = Vec::with_capacity(rule.len() * components);
        for (x, _) in rule.iter() {
            if !self.constrained {
                values.extend(std::iter::repeat(Var::constant(0.0)).take(*components));
                continue;
            }
            let u = self.field(tape, f, x, 0)?;
            match &self.kind {
                Kind::MinimalSurface => values.push(tape.lincomb(-x[1], [(1.0, u[0].var())])),
                Kind::GradShafranov(c) => {
                    values.push(tape.lincomb(c.solovev(x[0], x[1]), [(-1.0, u[0].var())]))
                }
                Kind::Beltrami => {
                    let b = beltrami::target(x);
                    for (uc, bc) in u.iter().zip(b) {
                        values.push(tape.lincomb(-bc, [(1.0, uc.var())]));
                    }
                }
                Kind::Geodesic(_) => unreachable!(),
            }
        }
        Ok(ConstraintValue::Boundary {
            values,
            components: *components,
        })
    }

    fn check_kind(&self, cv: &ConstraintValue) -> Result<()> {
        match (&self.w_space, cv) {
            (WSpace::FiniteDim(n), ConstraintValue::Finite(v)) if v.len() == *n => Ok(()),
            (WSpace::BoundaryL2 { rule, components }, ConstraintValue::Boundary { values, components: c })
                if c == components && values.len() == rule.len() * components =>
            {
                Ok(())
            }
            _ => usage(format!("constraint value does not match the W space of {}", self.name)),
        }
    }

    /// `|g|²_W`.
    pub fn w_norm_sq(&self, tape: &mut Tape, cv: &ConstraintValue) -> Result<Var> {
        self.check_kind(cv)?;
        match (&self.w_space, cv) {
            (WSpace::FiniteDim(_), ConstraintValue::Finite(v)) => {
                let mut acc = tape.combo(0.0);
                for g in v {
                    acc.prod(*g, *g);
                }
                Ok(acc.finish())
            }
            (WSpace::BoundaryL2 { rule, components }, ConstraintValue::Boundary { values, .. }) => {
                let sq: Vec<(f64, Var)> = values
                    .iter()
                    .enumerate()
                    .map(|(k, g)| (rule.weight(k / components), tape.square(*g)))
                    .collect();
                Ok(tape.lincomb(0.0, sq))
            }
            _ => unreachable!(),
        }
    }

    /// `⟨λ, g⟩_W` with `λ` given at the same nodes and components as `g`.
    pub fn w_pair(&self, tape: &mut Tape, lambda: &[f64], cv: &ConstraintValue) -> Result<Var> {
        self.check_kind(cv)?;
        let g = cv.vars();
        if lambda.len() != g.len() {
            return usage(format!(
                "multiplier has {} values but the constraint has {}",
                lambda.len(),
                g.len()
            ));
        }
        Ok(match &self.w_space {
            WSpace::FiniteDim(_) => tape.lincomb(0.0, lambda.iter().copied().zip(g.iter().copied())),
            WSpace::BoundaryL2 { rule, components } => tape.lincomb(
                0.0,
                lambda
                    .iter()
                    .zip(g)
                    .enumerate()
                    .map(|(k, (l, gk))| (rule.weight(k / components) * l, *gk)),
            ),
        })
    }

    /// `|v|²_W` for plain values laid out like a constraint value.
    pub fn w_norm_sq_f64(&self, v: &[f64]) -> f64 {
        match &self.w_space {
            WSpace::FiniteDim(_) => v.iter().map(|x| x * x).sum(),
            WSpace::BoundaryL2 { rule, components } => v
                .iter()
                .enumerate()
                .map(|(k, x)| rule.weight(k / components) * x * x)
                .sum(),
        }
    }
}

/// Constant Vars for evaluating a network without recording anything.
pub fn constant_params(params: &[f64]) -> Vec<Var> {
    params.iter().map(|&p| Var::constant(p)).collect()
}

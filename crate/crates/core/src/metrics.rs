//! Absolute, relative-objective and constraint errors.

use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::error::Result;
use crate::nets::NetworkSpec;
use crate::problems::{constant_params, Field, Problem};

/// Below this `|f(u_true)|` the relative objective error falls back to `|f(û)|`.
pub const RELATIVE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorTriple {
    pub absolute: f64,
    pub relative_objective: f64,
    /// Set when `f(u_true)` is zero and `relative_objective` holds `|f(û)|`.
    pub relative_fallback: bool,
    pub constraint: f64,
    /// `f(û)` on the error rule.
    pub objective: f64,
}

/// `√(∫(û−u_true)² dV / ∫dV)` over the error rule; vector fields sum the
/// squared components.
pub fn absolute_error(problem: &Problem, field: &Field) -> Result<f64> {
    let rule = problem.error_rule();
    let mut tape = Tape::new();
    let num = rule.integrate(|x| {
        let u = problem.field(&mut tape, field, x, 0)?;
        let t = problem.truth(x)?;
        tape.reset();
        Ok(u.iter().zip(&t).map(|(a, b)| (a.value() - b).powi(2)).sum())
    })?;
    Ok((num / rule.total_weight()).sqrt())
}

/// `f(û)` on the error rule, evaluated without recording.
pub fn objective_value(problem: &Problem, field: &Field) -> Result<f64> {
    let mut tape = Tape::new();
    Ok(problem
        .objective_on(&mut tape, problem.error_rule(), field)?
        .value())
}

/// `|f(û) − f_true| / |f_true|`, or `(|f(û)|, true)` when `f_true ≈ 0`.
pub fn relative_objective_error(f_hat: f64, f_true: f64) -> (f64, bool) {
    if f_true.abs() < RELATIVE_FLOOR {
        (f_hat.abs(), true)
    } else {
        ((f_hat - f_true).abs() / f_true.abs(), false)
    }
}

/// `|g(û)|_W / Z`.
pub fn constraint_error(problem: &Problem, field: &Field) -> Result<f64> {
    let mut tape = Tape::new();
    let cv = problem.evaluate_constraint(&mut tape, field)?;
    Ok(problem.w_norm_sq_f64(&cv.values()).sqrt() / problem.z_norm)
}

pub fn evaluate_field(problem: &Problem, field: &Field) -> Result<ErrorTriple> {
    let objective = objective_value(problem, field)?;
    let (relative_objective, relative_fallback) =
        relative_objective_error(objective, problem.f_true);
    Ok(ErrorTriple {
        absolute: absolute_error(problem, field)?,
        relative_objective,
        relative_fallback,
        constraint: constraint_error(problem, field)?,
        objective,
    })
}

/// All three errors of a network with the given parameters.
pub fn evaluate(problem: &Problem, spec: &NetworkSpec, params: &[f64]) -> Result<ErrorTriple> {
    let p = constant_params(params);
    evaluate_field(problem, &Field::Net { spec, params: &p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Jet2;
    use crate::error::Result;
    use crate::problems::{GeodesicEnds, ProblemName, QuadConfig};

    fn problems() -> Vec<Problem> {
        let q = QuadConfig {
            n1d: 24,
            n2d: 12,
            nface: 4,
            mc_points: 200,
            error_n3d: 6,
            ..QuadConfig::default()
        };
        ProblemName::ALL
            .iter()
            .map(|&n| Problem::build(n, &q, GeodesicEnds::DEFAULT).unwrap())
            .collect()
    }

    #[test]
    fn truth_has_zero_errors() {
        for p in problems() {
            let e = evaluate_field(&p, &Field::Truth).unwrap();
            assert_eq!(e.absolute, 0.0, "{}", p.name);
            assert!(e.constraint < 1e-11, "{}", p.name);
            if p.name == ProblemName::GradShafranov {
                assert!(e.relative_fallback && e.relative_objective < 1e-10);
            } else {
                assert!(!e.relative_fallback);
            }
        }
    }

    #[test]
    fn constant_offset_is_recovered() {
        for p in problems() {
            let shifted = |t: &mut Tape, x: &[Jet2]| -> Result<Vec<Jet2>> {
                let u = p.truth_jets(t, x)?;
                Ok(u.iter().map(|j| j.scale_shift(t, 1.0, 0.1)).collect())
            };
            let a = absolute_error(&p, &Field::Custom(&shifted)).unwrap();
            let expected = 0.1 * (p.components() as f64).sqrt();
            assert!((a - expected).abs() < 1e-12, "{}: {a}", p.name);
        }
    }

    #[test]
    fn minimal_surface_boundary_gap() {
        let p = &problems()[0];
        let c = 0.37;
        let shifted = |t: &mut Tape, x: &[Jet2]| -> Result<Vec<Jet2>> {
            Ok(vec![x[1].scale_shift(t, 1.0, c)])
        };
        let e = constraint_error(p, &Field::Custom(&shifted)).unwrap();
        assert!((e - c).abs() < 1e-12);
    }

    #[test]
    fn geodesic_sine_perturbation() {
        let q = QuadConfig {
            n1d: 64,
            ..QuadConfig::default()
        };
        let p = Problem::build(ProblemName::Geodesic, &q, GeodesicEnds::DEFAULT).unwrap();
        let truth = *p.geodesic_truth().unwrap();
        let (t0, t1) = (truth.ends.theta0, truth.ends.theta1);
        let amp = 0.05;
        let pert = move |t: &mut Tape, x: &[Jet2]| -> Result<Vec<Jet2>> {
            let base = truth.jet(t, &x[0])?;
            let w = 2.0 * std::f64::consts::PI / (t1 - t0);
            let s = x[0].scale_shift(t, w, -w * t0).sin(t);
            Ok(vec![Jet2::linear(t, 0.0, &[(1.0, &base), (amp, &s)])?])
        };
        let a = absolute_error(&p, &Field::Custom(&pert)).unwrap();
        assert!((a - amp / 2f64.sqrt()).abs() < 1e-6);
        let e = constraint_error(&p, &Field::Custom(&pert)).unwrap();
        assert!(e < 1e-9);
    }

    #[test]
    fn relative_error_cases() {
        assert_eq!(relative_objective_error(4.0, 2.0), (1.0, false));
        assert_eq!(relative_objective_error(2.0, 2.0), (0.0, false));
        assert_eq!(relative_objective_error(-0.3, 0.0), (0.3, true));
    }
}

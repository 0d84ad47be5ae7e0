use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::autodiff::{Jet2, Tape, Var};
use crate::error::{usage, Error, Result};

/// Endpoints `(θ0, φ0)` and `(θ1, φ1)` in spherical coordinates on the unit
/// sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicEnds {
    pub theta0: f64,
    pub phi0: f64,
    pub theta1: f64,
    pub phi1: f64,
}

impl GeodesicEnds {
    pub const DEFAULT: GeodesicEnds = GeodesicEnds {
        theta0: PI / 4.0,
        phi0: 0.0,
        theta1: 3.0 * PI / 4.0,
        phi1: PI / 2.0,
    };

    pub const ANTIPODAL: GeodesicEnds = GeodesicEnds {
        theta0: PI / 4.0,
        phi0: 0.0,
        theta1: 3.0 * PI / 4.0,
        phi1: PI,
    };
}

impl Default for GeodesicEnds {
    fn default() -> Self {
        Self::DEFAULT
    }
}

pub fn sphere_point(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Great-circle arc written as `φ(θ) = α + shift + s·acos(q(θ))` with
/// `q(θ) = −n_z cot θ / ρ`, where `n` is the unit plane normal and
/// `ρ = √(n_x² + n_y²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicTruth {
    pub ends: GeodesicEnds,
    pub normal: [f64; 3],
    pub central_angle: f64,
    alpha: f64,
    rho: f64,
    sign: f64,
    shift: f64,
}

impl GeodesicTruth {
    pub fn new(ends: GeodesicEnds) -> Result<Self> {
        let GeodesicEnds {
            theta0,
            phi0,
            theta1,
            phi1,
        } = ends;
        if !(0.0 < theta0 && theta0 < theta1 && theta1 < PI) {
            return usage(format!("geodesic needs 0 < θ0 < θ1 < π, got {ends:?}"));
        }
        let p0 = sphere_point(theta0, phi0);
        let p1 = sphere_point(theta1, phi1);
        let gap = ((0..3).map(|i| (p0[i] - p1[i]).powi(2)).sum::<f64>()).sqrt();
        if gap < 1e-12 {
            return usage("geodesic endpoints coincide");
        }
        let central_angle = dot(p0, p1).clamp(-1.0, 1.0).acos();
        let mut n = cross(p0, p1);
        if n.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-9 {
            // Antipodal: every great circle through p0 works; take the one
            // through the equator at the mean azimuth.
            let m = 0.5 * (phi0 + phi1);
            n = cross(p0, [m.cos(), m.sin(), 0.0]);
        }
        let len = n.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len < 1e-9 {
            return Err(Error::Domain("cannot fix a great circle through the endpoints".into()));
        }
        let n = [n[0] / len, n[1] / len, n[2] / len];
        let rho = (n[0] * n[0] + n[1] * n[1]).sqrt();
        if rho < 1e-12 {
            return usage("great circle is the equator; φ is not a function of θ");
        }
        let alpha = n[1].atan2(n[0]);
        let q = |t: f64| -n[2] / (t.tan() * rho);
        for t in [theta0, theta1] {
            if q(t).abs() > 1.0 + 1e-9 {
                return usage("great-circle arc is not a graph over θ between the endpoints");
            }
        }
        for sign in [1.0, -1.0] {
            let at = |t: f64| alpha + sign * q(t).clamp(-1.0, 1.0).acos();
            let shift = TAU * ((phi0 - at(theta0)) / TAU).round();
            if (at(theta0) + shift - phi0).abs() < 1e-6 && (at(theta1) + shift - phi1).abs() < 1e-6
            {
                return Ok(GeodesicTruth {
                    ends,
                    normal: n,
                    central_angle,
                    alpha,
                    rho,
                    sign,
                    shift,
                });
            }
        }
        Err(Error::Domain(format!(
            "no great-circle branch joins the endpoints {ends:?} without winding"
        )))
    }

    pub fn value(&self, theta: f64) -> f64 {
        let q = (-self.normal[2] / (theta.tan() * self.rho)).clamp(-1.0, 1.0);
        self.alpha + self.shift + self.sign * q.acos()
    }

    pub fn jet(&self, tape: &mut Tape, theta: &Jet2) -> Result<Jet2> {
        if theta.order() == 0 {
            return Ok(Jet2::constant(self.value(theta.value()), theta.dim(), 0));
        }
        let c = theta.cos(tape);
        let s = theta.sin(tape);
        let cot = c.div(tape, &s)?;
        let q = cot.scale_shift(tape, -self.normal[2] / self.rho, 0.0);
        let a = q.acos(tape)?;
        Ok(a.scale_shift(tape, self.sign, self.alpha + self.shift))
    }
}

/// `√(1 + (sin θ · u′)²)`.
pub(super) fn integrand(tape: &mut Tape, x: &[f64], u: &Jet2) -> Result<Var> {
    let v = tape.affine(u.grad(0), x[0].sin(), 0.0);
    let mut acc = tape.combo(1.0);
    acc.prod(v, v);
    let s = acc.finish();
    tape.sqrt(s)
}

/// Guard inside the square root so the gradient stays finite at exact
/// feasibility.
pub const SQRT_GUARD: f64 = 1e-24;

/// `√((u(θ0)−φ0)² + (u(θ1)−φ1)² + guard)`.
pub(super) fn constraint(tape: &mut Tape, ends: &GeodesicEnds, u0: Var, u1: Var) -> Result<Var> {
    let d0 = tape.lincomb(-ends.phi0, [(1.0, u0)]);
    let d1 = tape.lincomb(-ends.phi1, [(1.0, u1)]);
    let mut acc = tape.combo(SQRT_GUARD);
    acc.prod(d0, d0);
    acc.prod(d1, d1);
    let s = acc.finish();
    tape.sqrt(s)
}

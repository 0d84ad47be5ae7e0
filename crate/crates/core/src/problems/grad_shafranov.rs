use serde::{Deserialize, Serialize};

use crate::autodiff::{Jet2, Tape, Var};
use crate::error::Result;
use crate::quad::Domain;

/// Constants of the Solov'ev equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GsConstants {
    pub big_r: f64,
    pub a: f64,
    pub b: f64,
    pub c0: f64,
}

pub const GS_DEFAULT: GsConstants = GsConstants {
    big_r: 1.0,
    a: 1.2,
    b: -1.0,
    c0: 1.1,
};

impl GsConstants {
    /// `[0.9R, 1.1R] × [−0.1R, 0.1R]` in `(r, z)`.
    pub fn domain(&self) -> Domain {
        let r = self.big_r;
        Domain::Rectangle {
            lo: [0.9 * r, -0.1 * r],
            hi: [1.1 * r, 0.1 * r],
        }
    }

    /// `½(b+c₀)R²z² + c₀Rζz² + ½(a−c₀)R²ζ²` with `ζ = (r²−R²)/(2R)`.
    pub fn solovev(&self, r: f64, z: f64) -> f64 {
        let rr = self.big_r;
        let zeta = (r * r - rr * rr) / (2.0 * rr);
        0.5 * (self.b + self.c0) * rr * rr * z * z
            + self.c0 * rr * zeta * z * z
            + 0.5 * (self.a - self.c0) * rr * rr * zeta * zeta
    }

    pub fn solovev_jet(&self, tape: &mut Tape, x: &[Jet2]) -> Result<Jet2> {
        let rr = self.big_r;
        let (r, z) = (&x[0], &x[1]);
        let r2 = r.mul(tape, r)?;
        let zeta = r2.scale_shift(tape, 1.0 / (2.0 * rr), -rr / 2.0);
        let z2 = z.mul(tape, z)?;
        let zeta_z2 = zeta.mul(tape, &z2)?;
        let zeta2 = zeta.mul(tape, &zeta)?;
        Jet2::linear(
            tape,
            0.0,
            &[
                (0.5 * (self.b + self.c0) * rr * rr, &z2),
                (self.c0 * rr, &zeta_z2),
                (0.5 * (self.a - self.c0) * rr * rr, &zeta2),
            ],
        )
    }

    /// `u_zz + u_rr − u_r/r − a r² − b R²` at `x = (r, z)`.
    pub fn residual(&self, tape: &mut Tape, x: &[f64], u: &Jet2) -> Var {
        let r = x[0];
        tape.lincomb(
            -self.a * r * r - self.b * self.big_r * self.big_r,
            [
                (1.0, u.hess(1, 1)),
                (1.0, u.hess(0, 0)),
                (-1.0 / r, u.grad(0)),
            ],
        )
    }

    pub(super) fn integrand(&self, tape: &mut Tape, x: &[f64], u: &Jet2) -> Result<Var> {
        let res = self.residual(tape, x, u);
        Ok(tape.square(res))
    }
}

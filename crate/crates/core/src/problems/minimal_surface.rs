use std::f64::consts::PI;

use crate::autodiff::{Jet2, Tape, Var};
use crate::error::Result;

/// Helicoid area `2π(√2 + ln(1+√2))`.
pub(super) const F_TRUE: f64 = 2.0 * PI * (std::f64::consts::SQRT_2 + 0.881_373_587_019_543);

/// `√((1 + u_r²) r² + u_θ²)` at `x = (r, θ)`.
pub(super) fn integrand(tape: &mut Tape, x: &[f64], u: &Jet2) -> Result<Var> {
    let r = x[0];
    let rur = tape.affine(u.grad(0), r, 0.0);
    let ut = u.grad(1);
    let mut acc = tape.combo(r * r);
    acc.prod(rur, rur);
    acc.prod(ut, ut);
    let s = acc.finish();
    tape.sqrt(s)
}

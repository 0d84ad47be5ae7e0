//! Reverse-mode differentiation over parameters composed with order-2
//! forward jets over spatial inputs.

mod jet;
mod tape;

pub use jet::{curl, Jet2, MAX_DIM};
pub use tape::{Combo, Func, OpKind, Tape, Var};

use crate::error::Result;

/// Largest relative deviation between reverse-mode partials of `f` at
/// `point` and central differences with the given step.
///
/// `f` is evaluated once with tape leaves (for the reverse sweep) and
/// `2·len(point)` times with constant inputs. The deviation is
/// `max_i |ad_i − fd_i| / max(max_i |fd_i|, 1e-8)`, so coordinates with tiny
/// partials are judged against the scale of the whole gradient.
pub fn check_gradient<F>(f: F, point: &[f64], step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let leaves = tape.vars(point);
    let out = f(&mut tape, &leaves)?;
    let ad = tape.backward(out, &leaves)?;

    let mut scratch = Tape::new();
    let mut eval = |x: &[f64]| -> Result<f64> {
        scratch.reset();
        let consts: Vec<Var> = x.iter().map(|&v| Var::constant(v)).collect();
        Ok(f(&mut scratch, &consts)?.value())
    };
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    let mut x = point.to_vec();
    for i in 0..point.len() {
        x[i] = point[i] + step;
        let up = eval(&x)?;
        x[i] = point[i] - step;
        let down = eval(&x)?;
        x[i] = point[i];
        let fd = (up - down) / (2.0 * step);
        worst = worst.max((ad[i] - fd).abs());
        scale = scale.max(fd.abs());
    }
    Ok(worst / scale.max(1e-8))
}

use crate::autodiff::{Jet2, Tape, Var};

/// `[sin z + cos y, sin x + cos z, sin y + cos x]`.
pub(super) fn target(x: &[f64]) -> [f64; 3] {
    [
        x[2].sin() + x[1].cos(),
        x[0].sin() + x[2].cos(),
        x[1].sin() + x[0].cos(),
    ]
}

/// The boundary field on jets; it is its own curl.
pub fn beltrami_field(tape: &mut Tape, x: &[Jet2]) -> [Jet2; 3] {
    let s: Vec<Jet2> = x.iter().map(|j| j.sin(tape)).collect();
    let c: Vec<Jet2> = x.iter().map(|j| j.cos(tape)).collect();
    let add = |tape: &mut Tape, a: &Jet2, b: &Jet2| a.add(tape, b).expect("matching jets");
    [
        add(tape, &s[2], &c[1]),
        add(tape, &s[0], &c[2]),
        add(tape, &s[1], &c[0]),
    ]
}

/// `½|u|²`.
pub(super) fn integrand(tape: &mut Tape, u: &[Jet2]) -> Var {
    let mut acc = tape.combo(0.0);
    for c in u {
        acc.prod(c.var(), c.var());
    }
    let s = acc.finish();
    tape.affine(s, 0.5, 0.0)
}

//! Order-2 Taylor jets over spatial inputs whose coefficients are tape [`Var`]s.
//!
//! A [`Jet2`] carries the value, input gradient and input Hessian of some
//! quantity at one spatial point. Propagation follows the truncated chain
//! rules, and since every coefficient is a tape variable, one reverse sweep
//! differentiates spatial derivatives with respect to network parameters.
//! The Hessian is stored as an upper triangle, so `hess(i, j)` and
//! `hess(j, i)` read the same slot.

use super::tape::{Combo, Func, Tape, Var};
use crate::error::{usage, Result};

/// Largest supported input dimension.
pub const MAX_DIM: usize = 3;

const HIDX: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];

/// Upper-triangle slots `(i, j, slot)` with `i <= j < dim`.
fn hslots(dim: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..dim).flat_map(move |i| (i..dim).map(move |j| (i, j, HIDX[i][j])))
}

/// Which coefficient of a jet an operation is working on.
#[derive(Clone, Copy)]
enum Comp {
    Value,
    Grad(usize),
    Hess(usize, usize),
}

#[derive(Debug, Clone, Copy)]
pub struct Jet2 {
    v: Var,
    g: [Var; MAX_DIM],
    h: [Var; 6],
    dim: u8,
    order: u8,
}

impl Jet2 {
    /// A constant jet: all derivatives zero.
    pub fn constant(value: f64, dim: usize, order: u8) -> Self {
        Self::from_var(Var::constant(value), dim, order)
    }

    /// A jet whose value is `v` and whose derivatives vanish.
    pub fn from_var(v: Var, dim: usize, order: u8) -> Self {
        assert!(dim <= MAX_DIM && order <= 2);
        let z = Var::constant(0.0);
        Jet2 {
            v,
            g: [z; MAX_DIM],
            h: [z; 6],
            dim: dim as u8,
            order,
        }
    }

    /// Spatial coordinate `i` at value `x`: gradient `e_i`, Hessian zero.
    pub fn lift(x: f64, i: usize, dim: usize, order: u8) -> Self {
        let mut j = Self::constant(x, dim, order);
        if order >= 1 {
            j.g[i] = Var::constant(1.0);
        }
        j
    }

    /// Lifts a whole point.
    pub fn lift_point(x: &[f64], order: u8) -> Vec<Jet2> {
        (0..x.len())
            .map(|i| Self::lift(x[i], i, x.len(), order))
            .collect()
    }

    /// Builds a jet from explicit coefficients; `hess` is read as a full
    /// row-major `dim × dim` matrix and must be symmetric.
    pub fn from_parts(v: Var, grad: &[Var], hess: Option<&[Var]>) -> Self {
        let dim = grad.len();
        let order = if hess.is_some() { 2 } else { 1 };
        let mut j = Self::from_var(v, dim, order);
        j.g[..dim].copy_from_slice(grad);
        if let Some(h) = hess {
            assert_eq!(h.len(), dim * dim);
            for (a, b, s) in hslots(dim) {
                assert_eq!(
                    h[a * dim + b].value(),
                    h[b * dim + a].value(),
                    "Hessian must be symmetric"
                );
                j.h[s] = h[a * dim + b];
            }
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn var(&self) -> Var {
        self.v
    }

    pub fn value(&self) -> f64 {
        self.v.value()
    }

    pub fn grad(&self, i: usize) -> Var {
        debug_assert!(self.order >= 1 && i < self.dim());
        self.g[i]
    }

    pub fn hess(&self, i: usize, j: usize) -> Var {
        debug_assert!(self.order >= 2 && i < self.dim() && j < self.dim());
        self.h[HIDX[i][j]]
    }

    /// Same value and derivatives, truncated to a lower order.
    pub fn truncate(mut self, order: u8) -> Self {
        let z = Var::constant(0.0);
        if order < 2 {
            self.h = [z; 6];
        }
        if order < 1 {
            self.g = [z; MAX_DIM];
        }
        self.order = self.order.min(order);
        self
    }

    fn comp(&self, c: Comp) -> Var {
        match c {
            Comp::Value => self.v,
            Comp::Grad(i) => self.g[i],
            Comp::Hess(i, j) => self.h[HIDX[i][j]],
        }
    }

    fn set(&mut self, c: Comp, v: Var) {
        match c {
            Comp::Value => self.v = v,
            Comp::Grad(i) => self.g[i] = v,
            Comp::Hess(i, j) => self.h[HIDX[i][j]] = v,
        }
    }

    fn comps(&self) -> impl Iterator<Item = Comp> {
        let d = self.dim();
        let o = self.order;
        std::iter::once(Comp::Value)
            .chain((0..d).filter(move |_| o >= 1).map(Comp::Grad))
            .chain(
                hslots(d)
                    .filter(move |_| o >= 2)
                    .map(|(i, j, _)| Comp::Hess(i, j)),
            )
    }

    fn check_compatible(&self, other: &Jet2) -> Result<()> {
        if self.dim != other.dim || self.order != other.order {
            return usage(format!(
                "jet mismatch: dim {} order {} vs dim {} order {}",
                self.dim, self.order, other.dim, other.order
            ));
        }
        Ok(())
    }

    fn zero_like(&self) -> Jet2 {
        Jet2::constant(0.0, self.dim(), self.order)
    }

    /// Pushes the terms of component `c` of `a·b` into `acc`.
    fn product_terms(acc: &mut Combo<'_>, a: &Jet2, b: &Jet2, c: Comp) {
        match c {
            Comp::Value => acc.prod(a.v, b.v),
            Comp::Grad(i) => {
                acc.prod(a.g[i], b.v);
                acc.prod(a.v, b.g[i]);
            }
            Comp::Hess(i, j) => {
                let s = HIDX[i][j];
                acc.prod(a.h[s], b.v);
                acc.prod(a.g[i], b.g[j]);
                acc.prod(a.g[j], b.g[i]);
                acc.prod(a.v, b.h[s]);
            }
        }
    }

    /// `Σ aₖ·bₖ` with one node per coefficient.
    pub fn sum_of_products(tape: &mut Tape, pairs: &[(&Jet2, &Jet2)]) -> Result<Jet2> {
        let first = pairs.first().expect("at least one product").0;
        for (a, b) in pairs {
            first.check_compatible(a)?;
            first.check_compatible(b)?;
        }
        let mut out = first.zero_like();
        for c in first.comps() {
            let mut acc = tape.combo(0.0);
            for (a, b) in pairs {
                Self::product_terms(&mut acc, a, b, c);
            }
            out.set(c, acc.finish());
        }
        Ok(out)
    }

    pub fn mul(&self, tape: &mut Tape, other: &Jet2) -> Result<Jet2> {
        Self::sum_of_products(tape, &[(self, other)])
    }

    /// `c + Σ coefₖ·xₖ`, componentwise.
    pub fn linear(tape: &mut Tape, c: f64, terms: &[(f64, &Jet2)]) -> Result<Jet2> {
        let first = terms.first().expect("at least one term").1;
        for (_, x) in terms {
            first.check_compatible(x)?;
        }
        let mut out = first.zero_like();
        for comp in first.comps() {
            let base = if matches!(comp, Comp::Value) { c } else { 0.0 };
            let mut acc = tape.combo(base);
            for (coef, x) in terms {
                acc.lin(*coef, x.comp(comp));
            }
            out.set(comp, acc.finish());
        }
        Ok(out)
    }

    pub fn add(&self, tape: &mut Tape, other: &Jet2) -> Result<Jet2> {
        Self::linear(tape, 0.0, &[(1.0, self), (1.0, other)])
    }

    pub fn sub(&self, tape: &mut Tape, other: &Jet2) -> Result<Jet2> {
        Self::linear(tape, 0.0, &[(1.0, self), (-1.0, other)])
    }

    /// `scale·self + shift`.
    pub fn scale_shift(&self, tape: &mut Tape, scale: f64, shift: f64) -> Jet2 {
        Self::linear(tape, shift, &[(scale, self)]).expect("single operand")
    }

    /// Dense-layer unit: `bias + Σ_segments Σ_k w[k]·x[k]`.
    ///
    /// Each segment pairs a weight row with the inputs it multiplies; every
    /// coefficient of the result is one tape node.
    pub fn affine(tape: &mut Tape, segments: &[(&[Var], &[Jet2])], bias: Var) -> Result<Jet2> {
        let proto = segments
            .iter()
            .find_map(|(_, xs)| xs.first())
            .expect("affine needs at least one input");
        for (w, xs) in segments {
            if w.len() != xs.len() {
                return usage(format!(
                    "affine: {} weights for {} inputs",
                    w.len(),
                    xs.len()
                ));
            }
            for x in xs.iter() {
                proto.check_compatible(x)?;
            }
        }
        let mut out = proto.zero_like();
        for c in proto.comps() {
            let mut acc = tape.combo(0.0);
            for (w, xs) in segments {
                for (wk, xk) in w.iter().zip(xs.iter()) {
                    acc.prod(*wk, xk.comp(c));
                }
            }
            if matches!(c, Comp::Value) {
                acc.lin(1.0, bias);
            }
            out.set(c, acc.finish());
        }
        Ok(out)
    }

    /// Applies an elementary function through the order-2 chain rule:
    /// `g' = φ'(v)·g`, `H' = φ'(v)·H + φ''(v)·g gᵀ`.
    pub fn map(&self, tape: &mut Tape, f: Func) -> Result<Jet2> {
        let mut out = self.zero_like();
        out.v = tape.unary(f, 0, self.v)?;
        if self.order == 0 {
            return Ok(out);
        }
        let d = self.dim();
        let d1 = tape.unary(f, 1, self.v)?;
        for i in 0..d {
            let mut acc = tape.combo(0.0);
            acc.prod(d1, self.g[i]);
            out.g[i] = acc.finish();
        }
        if self.order == 2 {
            let d2 = tape.unary(f, 2, self.v)?;
            for (i, j, s) in hslots(d) {
                let gg = tape.mul(self.g[i], self.g[j]);
                let mut acc = tape.combo(0.0);
                acc.prod(d1, self.h[s]);
                acc.prod(d2, gg);
                out.h[s] = acc.finish();
            }
        }
        Ok(out)
    }

    pub fn tanh(&self, tape: &mut Tape) -> Jet2 {
        self.map(tape, Func::Tanh).expect("tanh is total")
    }

    pub fn sqrt(&self, tape: &mut Tape) -> Result<Jet2> {
        self.map(tape, Func::Sqrt)
    }

    pub fn recip(&self, tape: &mut Tape) -> Result<Jet2> {
        self.map(tape, Func::Recip)
    }

    pub fn div(&self, tape: &mut Tape, other: &Jet2) -> Result<Jet2> {
        self.check_compatible(other)?;
        let r = other.recip(tape)?;
        self.mul(tape, &r)
    }

    pub fn sin(&self, tape: &mut Tape) -> Jet2 {
        self.map(tape, Func::Sin).expect("sin is total")
    }

    pub fn cos(&self, tape: &mut Tape) -> Jet2 {
        self.map(tape, Func::Cos).expect("cos is total")
    }

    pub fn acos(&self, tape: &mut Tape) -> Result<Jet2> {
        self.map(tape, Func::Acos)
    }
}

/// Curl of a 3-vector field given as jets of order ≥ 1; the result has one
/// order less. With order-2 inputs, the divergence of the result is
/// identically zero because mixed partials share storage.
pub fn curl(tape: &mut Tape, h: &[Jet2]) -> Result<Vec<Jet2>> {
    if h.len() != 3 || h.iter().any(|j| j.dim() != 3 || j.order() == 0) {
        return usage("curl needs three order ≥ 1 jets over R³");
    }
    let order = h[0].order() - 1;
    // (component, derivative axis) pairs: u_i = ∂_a h_p − ∂_b h_q
    const TERMS: [((usize, usize), (usize, usize)); 3] =
        [((2, 1), (1, 2)), ((0, 2), (2, 0)), ((1, 0), (0, 1))];
    let diff = |j: &Jet2, axis: usize, c: Comp| -> Var {
        match c {
            Comp::Value => j.g[axis],
            Comp::Grad(i) => j.h[HIDX[axis][i]],
            Comp::Hess(..) => unreachable!("curl output order ≤ 1"),
        }
    };
    let mut out = Vec::with_capacity(3);
    for ((p, a), (q, b)) in TERMS {
        let mut u = Jet2::constant(0.0, 3, order);
        let comps: Vec<Comp> = u.comps().collect();
        for c in comps {
            let x = diff(&h[p], a, c);
            let y = diff(&h[q], b, c);
            let mut acc = tape.combo(0.0);
            acc.lin(1.0, x);
            acc.lin(-1.0, y);
            u.set(c, acc.finish());
        }
        out.push(u);
    }
    Ok(out)
}

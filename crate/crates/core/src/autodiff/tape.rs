//! Scalar Wengert tape for reverse-mode differentiation.
//!
//! Every recorded node stores its parents together with the local partial
//! derivative of the node with respect to each parent. Two node shapes cover
//! all arithmetic used by the solvers:
//!
//! * **combo** nodes compute `c + Σ coef·x + Σ a·b` in recording order, which
//!   lets a whole dense-layer dot product live in a single node;
//! * **unary** nodes compute the k-th derivative of an elementary function.
//!
//! Constants never touch the tape. A [`Var`] built with [`Var::constant`]
//! folds into the constant part of any combo it appears in, so evaluating a
//! network with constant parameters records nothing at all.

use std::sync::atomic::{AtomicU32, Ordering};

use crate::error::{usage, Error, Result};

const PAIR_FLAG: u32 = 1 << 31;
const CONST_NODE: u32 = u32::MAX;
const CONST_TAPE: u32 = 0;

static NEXT_TAPE_ID: AtomicU32 = AtomicU32::new(1);

fn fresh_id() -> u32 {
    NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed)
}

/// Handle to a scalar value, either a node on one tape or a free constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Var {
    idx: u32,
    tape: u32,
    value: f64,
}

impl Var {
    /// A constant that is not recorded on any tape.
    pub fn constant(value: f64) -> Self {
        Var {
            idx: CONST_NODE,
            tape: CONST_TAPE,
            value,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn is_const(&self) -> bool {
        self.idx == CONST_NODE
    }

    /// Node index on the owning tape, `None` for constants.
    pub fn index(&self) -> Option<usize> {
        (!self.is_const()).then_some(self.idx as usize)
    }
}

/// Elementary functions available as unary nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Tanh,
    Sqrt,
    Recip,
    Sin,
    Cos,
    Acos,
}

impl Func {
    /// k-th derivative of the function at `x`, for k in 0..=3.
    pub fn deriv(self, k: u8, x: f64) -> f64 {
        match self {
            Func::Tanh => {
                let t = x.tanh();
                let s = 1.0 - t * t;
                match k {
                    0 => t,
                    1 => s,
                    2 => -2.0 * t * s,
                    _ => -2.0 * s * (1.0 - 3.0 * t * t),
                }
            }
            Func::Sqrt => match k {
                0 => x.sqrt(),
                1 => 0.5 / x.sqrt(),
                2 => -0.25 / (x * x.sqrt()),
                _ => 0.375 / (x * x * x.sqrt()),
            },
            Func::Recip => match k {
                0 => 1.0 / x,
                1 => -1.0 / (x * x),
                2 => 2.0 / (x * x * x),
                _ => -6.0 / (x * x * x * x),
            },
            Func::Sin => match k % 4 {
                0 => x.sin(),
                1 => x.cos(),
                2 => -x.sin(),
                _ => -x.cos(),
            },
            Func::Cos => match k % 4 {
                0 => x.cos(),
                1 => -x.sin(),
                2 => -x.cos(),
                _ => x.sin(),
            },
            Func::Acos => {
                let q = 1.0 - x * x;
                match k {
                    0 => x.acos(),
                    1 => -1.0 / q.sqrt(),
                    2 => -x / (q * q.sqrt()),
                    _ => -(1.0 + 2.0 * x * x) / (q * q * q.sqrt()),
                }
            }
        }
    }

    /// Checks that the k-th derivative (and, for tape nodes, the (k+1)-th) is finite at `x`.
    fn check(self, x: f64, need_next: bool) -> Result<()> {
        match self {
            Func::Sqrt if x < 0.0 => Err(Error::Domain(format!("sqrt of negative value {x}"))),
            Func::Sqrt if x == 0.0 && need_next => Err(Error::Singularity(
                "derivative of sqrt at 0".to_string(),
            )),
            Func::Recip if x == 0.0 => {
                Err(Error::Singularity("division by a value of 0".to_string()))
            }
            Func::Acos if x.abs() > 1.0 => {
                Err(Error::Domain(format!("acos of {x} outside [-1, 1]")))
            }
            Func::Acos if x.abs() == 1.0 && need_next => Err(Error::Singularity(
                "derivative of acos at ±1".to_string(),
            )),
            _ => Ok(()),
        }
    }
}

/// Kind of a recorded node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Leaf,
    Combo,
    /// `Unary(f, k)` holds the k-th derivative of `f` at its parent.
    Unary(Func, u8),
}

/// Append-only record of a computation.
#[derive(Debug)]
pub struct Tape {
    id: u32,
    kinds: Vec<OpKind>,
    values: Vec<f64>,
    consts: Vec<f64>,
    starts: Vec<u32>,
    parents: Vec<u32>,
    partials: Vec<f64>,
    adjoints: Vec<f64>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: fresh_id(),
            kinds: Vec::new(),
            values: Vec::new(),
            consts: Vec::new(),
            starts: vec![0],
            parents: Vec::new(),
            partials: Vec::new(),
            adjoints: Vec::new(),
        }
    }

    /// Drops every node. Vars recorded before the reset become invalid.
    pub fn reset(&mut self) {
        self.id = fresh_id();
        self.kinds.clear();
        self.values.clear();
        self.consts.clear();
        self.starts.truncate(1);
        self.parents.clear();
        self.partials.clear();
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    /// Number of stored (parent, partial) entries.
    pub fn entry_count(&self) -> usize {
        self.parents.len()
    }

    pub fn kind(&self, node: usize) -> OpKind {
        self.kinds[node]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Whether `v` is a node of this tape (constants are not).
    pub fn owns(&self, v: Var) -> bool {
        v.tape == self.id && (v.idx as usize) < self.kinds.len()
    }

    fn push_node(&mut self, kind: OpKind, value: f64, c: f64) -> Var {
        let idx = self.kinds.len() as u32;
        assert!(idx < PAIR_FLAG, "tape overflow");
        self.kinds.push(kind);
        self.values.push(value);
        self.consts.push(c);
        self.starts.push(self.parents.len() as u32);
        Var {
            idx,
            tape: self.id,
            value,
        }
    }

    /// New leaf variable.
    pub fn var(&mut self, value: f64) -> Var {
        self.push_node(OpKind::Leaf, value, 0.0)
    }

    /// Leaves for every entry of `values`, contiguous on the tape.
    pub fn vars(&mut self, values: &[f64]) -> Vec<Var> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    /// Starts a combo node `c + Σ terms`.
    pub fn combo(&mut self, c: f64) -> Combo<'_> {
        let start = self.parents.len();
        Combo {
            tape: self,
            c,
            running: c,
            start,
            any_var: false,
            const_after_var: false,
        }
    }

    fn check_var(&self, v: Var) {
        debug_assert!(
            v.is_const() || v.tape == self.id,
            "Var from a different tape or a reset tape"
        );
    }

    /// k-th derivative of `f` applied to `x`, recorded when `x` is a tape node.
    pub fn unary(&mut self, f: Func, k: u8, x: Var) -> Result<Var> {
        debug_assert!(k <= 2);
        self.check_var(x);
        f.check(x.value, !x.is_const())?;
        let value = f.deriv(k, x.value);
        if x.is_const() {
            return Ok(Var::constant(value));
        }
        let partial = f.deriv(k + 1, x.value);
        self.parents.push(x.idx);
        self.partials.push(partial);
        Ok(self.push_node(OpKind::Unary(f, k), value, 0.0))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut c = self.combo(0.0);
        c.lin(1.0, a);
        c.lin(1.0, b);
        c.finish()
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let mut c = self.combo(0.0);
        c.lin(1.0, a);
        c.lin(-1.0, b);
        c.finish()
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let mut c = self.combo(0.0);
        c.prod(a, b);
        c.finish()
    }

    /// `scale·a + shift`.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let mut c = self.combo(shift);
        c.lin(scale, a);
        c.finish()
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.mul(a, a)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(Func::Tanh, 0, a).expect("tanh is total")
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.unary(Func::Sqrt, 0, a)
    }

    pub fn recip(&mut self, a: Var) -> Result<Var> {
        self.unary(Func::Recip, 0, a)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let r = self.recip(b)?;
        Ok(self.mul(a, r))
    }

    /// `c + Σ coef·x` as a single node.
    pub fn lincomb(&mut self, c: f64, terms: impl IntoIterator<Item = (f64, Var)>) -> Var {
        let mut acc = self.combo(c);
        for (coef, x) in terms {
            acc.lin(coef, x);
        }
        acc.finish()
    }

    /// Reverse sweep from `output`; returns the adjoint of every node.
    pub fn adjoints(&mut self, output: Var) -> Result<&[f64]> {
        let n = self.kinds.len();
        self.adjoints.clear();
        self.adjoints.resize(n, 0.0);
        if output.is_const() {
            return Ok(&self.adjoints);
        }
        if !self.owns(output) {
            return usage("backward output is not a node of this tape");
        }
        let out = output.idx as usize;
        self.adjoints[out] = 1.0;
        for node in (0..=out).rev() {
            let adj = self.adjoints[node];
            if adj == 0.0 {
                continue;
            }
            let (s, e) = (self.starts[node] as usize, self.starts[node + 1] as usize);
            for k in s..e {
                let p = (self.parents[k] & !PAIR_FLAG) as usize;
                self.adjoints[p] += self.partials[k] * adj;
            }
        }
        Ok(&self.adjoints)
    }

    /// Partials of `output` with respect to each of `wrt`.
    pub fn backward(&mut self, output: Var, wrt: &[Var]) -> Result<Vec<f64>> {
        for w in wrt {
            if !self.owns(*w) {
                return usage("backward wrt variable is not a node of this tape");
            }
        }
        let adj = self.adjoints(output)?;
        Ok(wrt.iter().map(|w| adj[w.idx as usize]).collect())
    }

    /// Recomputes every node value from the leaves, in recording order.
    pub fn replay(&self) -> Vec<f64> {
        let mut vals = Vec::with_capacity(self.values.len());
        for node in 0..self.kinds.len() {
            let (s, e) = (self.starts[node] as usize, self.starts[node + 1] as usize);
            let v = match self.kinds[node] {
                OpKind::Leaf => self.values[node],
                OpKind::Combo => combo_value(
                    self.consts[node],
                    &self.parents[s..e],
                    &self.partials[s..e],
                    &vals,
                ),
                OpKind::Unary(f, k) => f.deriv(k, vals[self.parents[s] as usize]),
            };
            vals.push(v);
        }
        vals
    }
}

/// Value of a combo node: constant, then every term in recording order.
fn combo_value(c: f64, parents: &[u32], partials: &[f64], vals: &[f64]) -> f64 {
    let mut acc = c;
    let mut k = 0;
    while k < parents.len() {
        let p = parents[k];
        if p & PAIR_FLAG != 0 {
            let a = vals[(p & !PAIR_FLAG) as usize];
            let b = vals[parents[k + 1] as usize];
            acc += a * b;
            k += 2;
        } else {
            acc += partials[k] * vals[p as usize];
            k += 1;
        }
    }
    acc
}

/// Builder for a combo node. Constant terms fold into the node constant.
pub struct Combo<'t> {
    tape: &'t mut Tape,
    c: f64,
    running: f64,
    start: usize,
    any_var: bool,
    const_after_var: bool,
}

impl Combo<'_> {
    fn const_term(&mut self, t: f64) {
        self.c += t;
        self.running += t;
        if self.any_var {
            self.const_after_var = true;
        }
    }

    /// Adds `coef·x`.
    pub fn lin(&mut self, coef: f64, x: Var) {
        if coef == 0.0 {
            return;
        }
        self.tape.check_var(x);
        if x.is_const() {
            self.const_term(coef * x.value);
        } else {
            self.tape.parents.push(x.idx);
            self.tape.partials.push(coef);
            self.running += coef * x.value;
            self.any_var = true;
        }
    }

    /// Adds `a·b`.
    pub fn prod(&mut self, a: Var, b: Var) {
        match (a.is_const(), b.is_const()) {
            (true, true) => {
                if a.value != 0.0 && b.value != 0.0 {
                    self.const_term(a.value * b.value)
                }
            }
            (true, false) => self.lin(a.value, b),
            (false, true) => self.lin(b.value, a),
            (false, false) => {
                self.tape.check_var(a);
                self.tape.check_var(b);
                self.tape.parents.push(a.idx | PAIR_FLAG);
                self.tape.partials.push(b.value);
                self.tape.parents.push(b.idx);
                self.tape.partials.push(a.value);
                self.running += a.value * b.value;
                self.any_var = true;
            }
        }
    }

    pub fn finish(self) -> Var {
        if !self.any_var {
            return Var::constant(self.running);
        }
        let value = if self.const_after_var {
            combo_value(
                self.c,
                &self.tape.parents[self.start..],
                &self.tape.partials[self.start..],
                &self.tape.values,
            )
        } else {
            self.running
        };
        self.tape.push_node(OpKind::Combo, value, self.c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_value_and_self_gradient() {
        let mut t = Tape::new();
        let x = t.var(3.0);
        assert_eq!(x.value(), 3.0);
        assert_eq!(t.backward(x, &[x]).unwrap(), vec![1.0]);
    }

    #[test]
    fn independent_leaves() {
        let mut t = Tape::new();
        let x = t.var(1.0);
        let y = t.var(2.0);
        assert_eq!(t.backward(x, &[y]).unwrap(), vec![0.0]);
    }

    #[test]
    fn product_rule() {
        let mut t = Tape::new();
        let x = t.var(2.0);
        let y = t.var(5.0);
        let f = t.mul(x, y);
        assert_eq!(t.backward(f, &[x, y]).unwrap(), vec![5.0, 2.0]);
    }

    #[test]
    fn square_and_tanh() {
        let mut t = Tape::new();
        let x = t.var(3.0);
        let f = t.square(x);
        assert_eq!(t.backward(f, &[x]).unwrap(), vec![6.0]);

        let z = t.var(0.0);
        let g = t.tanh(z);
        assert_eq!(t.backward(g, &[z]).unwrap(), vec![1.0]);
    }

    #[test]
    fn foreign_output_is_usage_error() {
        let mut a = Tape::new();
        let mut b = Tape::new();
        let x = a.var(1.0);
        let y = b.var(1.0);
        let f = a.square(x);
        assert!(matches!(b.backward(f, &[y]), Err(Error::Usage(_))));
        a.reset();
        let z = a.var(1.0);
        assert!(matches!(a.backward(f, &[z]), Err(Error::Usage(_))));
    }

    #[test]
    fn constants_fold_off_tape() {
        let mut t = Tape::new();
        let a = Var::constant(2.0);
        let b = Var::constant(4.0);
        let p = t.mul(a, b);
        assert!(p.is_const());
        assert_eq!(p.value(), 8.0);
        let s = t.sqrt(b).unwrap();
        assert_eq!(s.value(), 2.0);
        assert!(t.is_empty());
    }

    #[test]
    fn domain_errors() {
        let mut t = Tape::new();
        let x = t.var(-1.0);
        assert!(matches!(t.sqrt(x), Err(Error::Domain(_))));
        let z = t.var(0.0);
        assert!(matches!(t.recip(z), Err(Error::Singularity(_))));
        let one = t.var(1.0);
        assert!(matches!(t.div(one, z), Err(Error::Singularity(_))));
    }

    #[test]
    fn mixed_combo_with_trailing_constant_replays() {
        let mut t = Tape::new();
        let x = t.var(0.1);
        let y = t.var(0.7);
        let mut c = t.combo(1e16);
        c.prod(x, y);
        c.lin(3.0, Var::constant(-1e16));
        c.lin(1.0, x);
        let v = c.finish();
        let replayed = t.replay();
        assert_eq!(replayed[v.index().unwrap()], v.value());
        assert_eq!(t.values(), &replayed[..]);
    }

    #[test]
    fn func_derivatives_match_finite_differences() {
        let h = 1e-5;
        let cases = [
            (Func::Tanh, 0.3),
            (Func::Sqrt, 1.7),
            (Func::Recip, -0.8),
            (Func::Sin, 0.4),
            (Func::Cos, 1.1),
            (Func::Acos, 0.35),
        ];
        for (f, x) in cases {
            for k in 0..3u8 {
                let fd = (f.deriv(k, x + h) - f.deriv(k, x - h)) / (2.0 * h);
                let exact = f.deriv(k + 1, x);
                assert!(
                    (fd - exact).abs() < 1e-7 * (1.0 + exact.abs()),
                    "{f:?} k={k}: fd {fd} vs {exact}"
                );
            }
        }
    }
}

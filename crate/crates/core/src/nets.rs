//! Feed-forward and LSTM function approximators with a fixed flat parameter
//! layout.
//!
//! Canonical parameter order (all matrices row-major, `rows × cols`):
//!
//! * **FF(m, L, d_I, d_O)**: `W⁽⁰⁾ (m×d_I), b⁽⁰⁾, W⁽¹⁾ (m×m), b⁽¹⁾, …,
//!   W⁽ᴸ⁻¹⁾, b⁽ᴸ⁻¹⁾`, then the output map `W (d_O×m), b (d_O)`.
//! * **LSTM(m, L, d_I, d_O)**: for block 1, `W_f U_f b_f W_g U_g b_g W_r U_r
//!   b_r W_s U_s b_s` with every `W`, `U` of shape `m×d_I`; for blocks
//!   `i ≥ 2`, `W_f U_f W_g U_g W_r U_r W_s U_s` with `U` of shape `m×m` (the
//!   gate biases are shared by all blocks); then `W (d_O×m), b (d_O)`.
//!
//! All hidden activations are `tanh`, including the four LSTM gates.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Jet2, Tape, Var};
use crate::error::{usage, Error, Result};

/// Flat trainable parameters in canonical order.
pub type ParamVector = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetKind {
    #[serde(rename = "FF")]
    FeedForward,
    #[serde(rename = "LSTM")]
    Lstm,
}

/// Architecture descriptor: kind, width `m`, depth `L`, input and output dims.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub kind: NetKind,
    pub width: usize,
    pub depth: usize,
    pub input_dim: usize,
    pub output_dim: usize,
}

/// One tensor of the flat layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorShape {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub bias: bool,
}

impl TensorShape {
    fn matrix(name: String, rows: usize, cols: usize) -> Self {
        TensorShape {
            name,
            rows,
            cols,
            bias: false,
        }
    }

    fn bias(name: String, len: usize) -> Self {
        TensorShape {
            name,
            rows: len,
            cols: 1,
            bias: true,
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

const GATES: [char; 4] = ['f', 'g', 'r', 's'];

impl NetworkSpec {
    pub fn ff(width: usize, depth: usize, input_dim: usize, output_dim: usize) -> Self {
        NetworkSpec {
            kind: NetKind::FeedForward,
            width,
            depth,
            input_dim,
            output_dim,
        }
    }

    pub fn lstm(width: usize, depth: usize, input_dim: usize, output_dim: usize) -> Self {
        NetworkSpec {
            kind: NetKind::Lstm,
            width,
            depth,
            input_dim,
            output_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.depth == 0 || self.input_dim == 0 || self.output_dim == 0 {
            return usage(format!("degenerate network spec {self}"));
        }
        if self.input_dim > crate::autodiff::MAX_DIM {
            return usage(format!(
                "input dimension {} exceeds the supported {}",
                self.input_dim,
                crate::autodiff::MAX_DIM
            ));
        }
        Ok(())
    }

    /// Tensors in canonical order.
    pub fn tensors(&self) -> Vec<TensorShape> {
        let (m, l, di, d_o) = (self.width, self.depth, self.input_dim, self.output_dim);
        let mut out = Vec::new();
        match self.kind {
            NetKind::FeedForward => {
                for i in 0..l {
                    let fan_in = if i == 0 { di } else { m };
                    out.push(TensorShape::matrix(format!("W_f^({i})"), m, fan_in));
                    out.push(TensorShape::bias(format!("b_f^({i})"), m));
                }
            }
            NetKind::Lstm => {
                for i in 1..=l {
                    for gate in GATES {
                        let u_cols = if i == 1 { di } else { m };
                        out.push(TensorShape::matrix(format!("W_{gate}^({i})"), m, di));
                        out.push(TensorShape::matrix(format!("U_{gate}^({i})"), m, u_cols));
                        if i == 1 {
                            out.push(TensorShape::bias(format!("b_{gate}"), m));
                        }
                    }
                }
            }
        }
        out.push(TensorShape::matrix("W".to_string(), d_o, m));
        out.push(TensorShape::bias("b".to_string(), d_o));
        out
    }

    /// Number of trainable parameters.
    ///
    /// FF: `m·d_I + m²(L−1) + L·m + d_O·m + d_O`.
    /// LSTM: `4m[d_I(L+1) + m(L−1) + 1] + d_O(m+1)`.
    pub fn param_count(&self) -> usize {
        let (m, l, di, d_o) = (self.width, self.depth, self.input_dim, self.output_dim);
        match self.kind {
            NetKind::FeedForward => m * di + m * m * (l - 1) + l * m + d_o * m + d_o,
            NetKind::Lstm => 4 * m * (di * (l + 1) + m * (l - 1) + 1) + d_o * (m + 1),
        }
    }

    /// Evaluates the network on jets. `params` must follow the canonical layout.
    pub fn forward(&self, tape: &mut Tape, params: &[Var], x: &[Jet2]) -> Result<Vec<Jet2>> {
        self.check_io(params.len(), x.len())?;
        match self.kind {
            NetKind::FeedForward => self.ff_forward(tape, params, x),
            NetKind::Lstm => self.lstm_forward(tape, params, x),
        }
    }

    fn check_io(&self, n_params: usize, n_in: usize) -> Result<()> {
        if n_params != self.param_count() {
            return usage(format!(
                "{self} expects {} parameters, got {n_params}",
                self.param_count()
            ));
        }
        if n_in != self.input_dim {
            return usage(format!(
                "{self} expects input dimension {}, got {n_in}",
                self.input_dim
            ));
        }
        Ok(())
    }

    fn ff_forward(&self, tape: &mut Tape, p: &[Var], x: &[Jet2]) -> Result<Vec<Jet2>> {
        let m = self.width;
        let mut cur = Cursor::default();
        let mut hidden: Vec<Jet2> = x.to_vec();
        for _ in 0..self.depth {
            let fan_in = hidden.len();
            let w = cur.take(p, m * fan_in);
            let b = cur.take(p, m);
            let mut next = Vec::with_capacity(m);
            for u in 0..m {
                let row = &w[u * fan_in..(u + 1) * fan_in];
                let z = Jet2::affine(tape, &[(row, &hidden)], b[u])?;
                next.push(z.tanh(tape));
            }
            hidden = next;
        }
        self.output_layer(tape, p, &mut cur, &hidden)
    }

    fn lstm_forward(&self, tape: &mut Tape, p: &[Var], x: &[Jet2]) -> Result<Vec<Jet2>> {
        let (m, di) = (self.width, self.input_dim);
        let (dim, order) = (x[0].dim(), x[0].order());
        let mut cur = Cursor::default();
        let mut h: Vec<Jet2> = vec![Jet2::constant(0.0, dim, order); di];
        let mut c: Vec<Jet2> = vec![Jet2::constant(0.0, dim, order); m];
        let mut biases: Vec<&[Var]> = Vec::new();
        for block in 1..=self.depth {
            let hl = h.len();
            let mut gates: Vec<Vec<Jet2>> = Vec::with_capacity(4);
            for gi in 0..4 {
                let w = cur.take(p, m * di);
                let u = cur.take(p, m * hl);
                if block == 1 {
                    biases.push(cur.take(p, m));
                }
                let b = biases[gi];
                let mut act = Vec::with_capacity(m);
                for k in 0..m {
                    let z = Jet2::affine(
                        tape,
                        &[
                            (&w[k * di..(k + 1) * di], x),
                            (&u[k * hl..(k + 1) * hl], &h),
                        ],
                        b[k],
                    )?;
                    act.push(z.tanh(tape));
                }
                gates.push(act);
            }
            let (f, g, r, s) = (&gates[0], &gates[1], &gates[2], &gates[3]);
            let mut next_c = Vec::with_capacity(m);
            let mut next_h = Vec::with_capacity(m);
            for k in 0..m {
                let ck = Jet2::sum_of_products(tape, &[(&f[k], &c[k]), (&g[k], &s[k])])?;
                let tc = ck.tanh(tape);
                let hk = r[k].mul(tape, &tc)?;
                next_c.push(ck);
                next_h.push(hk);
            }
            c = next_c;
            h = next_h;
        }
        self.output_layer(tape, p, &mut cur, &h)
    }

    fn output_layer(
        &self,
        tape: &mut Tape,
        p: &[Var],
        cur: &mut Cursor,
        hidden: &[Jet2],
    ) -> Result<Vec<Jet2>> {
        let m = self.width;
        let w = cur.take(p, self.output_dim * m);
        let b = cur.take(p, self.output_dim);
        debug_assert_eq!(cur.pos, p.len());
        (0..self.output_dim)
            .map(|o| Jet2::affine(tape, &[(&w[o * m..(o + 1) * m], hidden)], b[o]))
            .collect()
    }

    /// Plain evaluation without a tape. Uses the same summation order as the
    /// jet path, so values agree bit for bit.
    pub fn forward_f64(&self, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_io(params.len(), x.len())?;
        let m = self.width;
        let affine = |w: &[f64], xs: &[f64], acc: f64| -> f64 {
            w.iter().zip(xs).fold(acc, |a, (wk, xk)| a + wk * xk)
        };
        let mut cur = Cursor::default();
        let hidden = match self.kind {
            NetKind::FeedForward => {
                let mut hidden = x.to_vec();
                for _ in 0..self.depth {
                    let fan_in = hidden.len();
                    let w = cur.take(params, m * fan_in);
                    let b = cur.take(params, m);
                    hidden = (0..m)
                        .map(|u| (affine(&w[u * fan_in..(u + 1) * fan_in], &hidden, 0.0) + b[u]).tanh())
                        .collect();
                }
                hidden
            }
            NetKind::Lstm => {
                let di = self.input_dim;
                let mut h = vec![0.0; di];
                let mut c = vec![0.0; m];
                let mut biases: Vec<&[f64]> = Vec::new();
                for block in 1..=self.depth {
                    let hl = h.len();
                    let mut gates = Vec::with_capacity(4);
                    for gi in 0..4 {
                        let w = cur.take(params, m * di);
                        let u = cur.take(params, m * hl);
                        if block == 1 {
                            biases.push(cur.take(params, m));
                        }
                        let b = biases[gi];
                        let act: Vec<f64> = (0..m)
                            .map(|k| {
                                let a = affine(&w[k * di..(k + 1) * di], x, 0.0);
                                (affine(&u[k * hl..(k + 1) * hl], &h, a) + b[k]).tanh()
                            })
                            .collect();
                        gates.push(act);
                    }
                    for k in 0..m {
                        c[k] = 0.0 + gates[0][k] * c[k] + gates[1][k] * gates[3][k];
                    }
                    h = (0..m).map(|k| 0.0 + gates[2][k] * c[k].tanh()).collect();
                }
                h
            }
        };
        let w = cur.take(params, self.output_dim * m);
        let b = cur.take(params, self.output_dim);
        Ok((0..self.output_dim)
            .map(|o| affine(&w[o * m..(o + 1) * m], &hidden, 0.0) + b[o])
            .collect())
    }
}

#[derive(Default)]
struct Cursor {
    pos: usize,
}

impl Cursor {
    fn take<'a, T>(&mut self, p: &'a [T], n: usize) -> &'a [T] {
        let s = &p[self.pos..self.pos + n];
        self.pos += n;
        s
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            NetKind::FeedForward => "FF",
            NetKind::Lstm => "LSTM",
        };
        write!(
            f,
            "{kind}({}, {}, {}, {})",
            self.width, self.depth, self.input_dim, self.output_dim
        )
    }
}

impl FromStr for NetworkSpec {
    type Err = Error;

    /// Parses `FF(m, L, d_I, d_O)` or `LSTM(m, L, d_I, d_O)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse network spec {s:?}"));
        let s = s.trim();
        let open = s.find('(').ok_or_else(bad)?;
        let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let nums: Vec<usize> = inner
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let [m, l, di, d_o] = nums[..] else {
            return Err(bad());
        };
        let spec = match s[..open].trim().to_ascii_uppercase().as_str() {
            "FF" => NetworkSpec::ff(m, l, di, d_o),
            "LSTM" => NetworkSpec::lstm(m, l, di, d_o),
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// An architecture together with concrete parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: NetworkSpec,
    pub params: ParamVector,
}

impl Network {
    /// Glorot-uniform weights, zero biases; deterministic in `seed`.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(spec.param_count());
        for t in spec.tensors() {
            if t.bias {
                params.extend(std::iter::repeat(0.0).take(t.len()));
            } else {
                let limit = (6.0 / (t.rows + t.cols) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit);
                params.extend((0..t.len()).map(|_| dist.sample(&mut rng)));
            }
        }
        debug_assert_eq!(params.len(), spec.param_count());
        Ok(Network { spec, params })
    }

    pub fn from_params(spec: NetworkSpec, params: ParamVector) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return usage(format!(
                "{spec} needs {} parameters, got {}",
                spec.param_count(),
                params.len()
            ));
        }
        Ok(Network { spec, params })
    }

    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        Self::from_params(spec, vec![0.0; spec.param_count()])
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.spec.forward_f64(&self.params, x)
    }

    /// Jet evaluation with the parameters held constant (nothing is recorded).
    pub fn eval_jets(&self, tape: &mut Tape, x: &[Jet2]) -> Result<Vec<Jet2>> {
        let p: Vec<Var> = self.params.iter().map(|&v| Var::constant(v)).collect();
        self.spec.forward(tape, &p, x)
    }
}

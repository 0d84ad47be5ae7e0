//! Gauss–Legendre rules, tensor and boundary rules, Monte Carlo samples.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{usage, Error, Result};

/// A one-dimensional rule on `(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1D {
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Tensor product of two 1D rules; `x` is the first coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule2D {
    pub x: Rule1D,
    pub y: Rule1D,
}

/// Weighted points in up to three dimensions. Interior, boundary and Monte
/// Carlo rules all end up in this form.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRule {
    dim: usize,
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rectangle { lo: [f64; 2], hi: [f64; 2] },
    Box { lo: [f64; 3], hi: [f64; 3] },
}

/// Uniform points in an axis-aligned box, drawn once.
#[derive(Debug, Clone, PartialEq)]
pub struct MCSample {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub points: Vec<[f64; 3]>,
    pub volume: f64,
    pub seed: u64,
}

/// Gauss–Legendre nodes and weights on `(a, b)`, nodes increasing.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Rule1D> {
    if n == 0 {
        return usage("Gauss-Legendre rule needs at least one node");
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return usage(format!("invalid interval ({a}, {b})"));
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = (n + 1) / 2;
    for i in 0..half {
        // Tricomi initial guess for the i-th largest root.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut converged = false;
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-15 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numeric(format!(
                "Newton iteration for Legendre root {i} of P_{n} did not converge"
            )));
        }
        let (_, d) = legendre(n, z);
        dp = if d.is_finite() { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    Ok(Rule1D {
        a,
        b,
        nodes: x.iter().map(|t| c + h * t).collect(),
        weights: w.iter().map(|wi| h * wi).collect(),
    })
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

impl Rule1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn to_points(&self) -> PointRule {
        PointRule {
            dim: 1,
            points: self.nodes.iter().map(|&x| [x, 0.0, 0.0]).collect(),
            weights: self.weights.clone(),
        }
    }
}

impl Rule2D {
    pub fn new(nx: usize, ax: f64, bx: f64, ny: usize, ay: f64, by: f64) -> Result<Self> {
        Ok(Rule2D {
            x: gauss_legendre(nx, ax, bx)?,
            y: gauss_legendre(ny, ay, by)?,
        })
    }

    pub fn integrate(&self, mut f: impl FnMut(f64, f64) -> f64) -> f64 {
        let mut total = 0.0;
        for (&x, &wx) in self.x.nodes.iter().zip(&self.x.weights) {
            for (&y, &wy) in self.y.nodes.iter().zip(&self.y.weights) {
                total += wx * wy * f(x, y);
            }
        }
        total
    }

    pub fn to_points(&self) -> PointRule {
        let mut points = Vec::with_capacity(self.x.len() * self.y.len());
        let mut weights = Vec::with_capacity(points.capacity());
        for (&x, &wx) in self.x.nodes.iter().zip(&self.x.weights) {
            for (&y, &wy) in self.y.nodes.iter().zip(&self.y.weights) {
                points.push([x, y, 0.0]);
                weights.push(wx * wy);
            }
        }
        PointRule {
            dim: 2,
            points,
            weights,
        }
    }
}

impl PointRule {
    pub fn new(dim: usize, points: Vec<[f64; 3]>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > 3 || points.len() != weights.len() {
            return usage("malformed point rule");
        }
        Ok(PointRule {
            dim,
            points,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i][..self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.len()).map(move |i| (self.point(i), self.weights[i]))
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Concatenates rules of equal dimension.
    pub fn join(parts: Vec<PointRule>) -> Result<PointRule> {
        let dim = parts.first().map(|p| p.dim).unwrap_or(1);
        let mut out = PointRule {
            dim,
            points: Vec::new(),
            weights: Vec::new(),
        };
        for p in parts {
            if p.dim != dim {
                return usage("cannot join point rules of different dimension");
            }
            out.points.extend(p.points);
            out.weights.extend(p.weights);
        }
        Ok(out)
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> Result<f64>) -> Result<f64> {
        let mut total = 0.0;
        for (x, w) in self.iter() {
            let v = f(x)?;
            if !v.is_finite() {
                return Err(Error::Numeric(format!("non-finite integrand at {x:?}")));
            }
            total += w * v;
        }
        Ok(total)
    }

    /// `Σ wᵢ f(xᵢ)` recorded on the tape.
    pub fn integrate_var(
        &self,
        tape: &mut Tape,
        mut f: impl FnMut(&mut Tape, &[f64]) -> Result<Var>,
    ) -> Result<Var> {
        let mut terms = Vec::with_capacity(self.len());
        for (x, w) in self.iter() {
            let v = f(tape, x)?;
            if !v.value().is_finite() {
                return Err(Error::Numeric(format!("non-finite integrand at {x:?}")));
            }
            terms.push((w, v));
        }
        Ok(tape.lincomb(0.0, terms))
    }
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
            Domain::Box { .. } => 3,
        }
    }

    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::Rectangle { lo, hi } => (hi[0] - lo[0]) * (hi[1] - lo[1]),
            Domain::Box { lo, hi } => (0..3).map(|i| hi[i] - lo[i]).product(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let (lo, hi): (&[f64], &[f64]) = match self {
            Domain::Interval { a, b } => (std::slice::from_ref(a), std::slice::from_ref(b)),
            Domain::Rectangle { lo, hi } => (lo, hi),
            Domain::Box { lo, hi } => (lo, hi),
        };
        x.len() == lo.len() && x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| l <= v && v <= h)
    }

    fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        match *self {
            Domain::Interval { a, b } => ([a, 0.0, 0.0], [b, 0.0, 0.0]),
            Domain::Rectangle { lo, hi } => ([lo[0], lo[1], 0.0], [hi[0], hi[1], 0.0]),
            Domain::Box { lo, hi } => (lo, hi),
        }
    }

    fn check(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        for i in 0..self.dim() {
            if !(lo[i] < hi[i]) {
                return usage(format!("domain {self:?} has empty interior"));
            }
        }
        Ok(())
    }
}

/// Tensor Gauss–Legendre rule with `n` nodes per axis over the domain.
pub fn interior_rule(domain: &Domain, n: usize) -> Result<PointRule> {
    domain.check()?;
    let (lo, hi) = domain.bounds();
    let axes = (0..domain.dim())
        .map(|i| gauss_legendre(n, lo[i], hi[i]))
        .collect::<Result<Vec<_>>>()?;
    Ok(tensor(&axes))
}

fn tensor(axes: &[Rule1D]) -> PointRule {
    let mut points = vec![[0.0; 3]];
    let mut weights = vec![1.0];
    for (d, ax) in axes.iter().enumerate() {
        let mut np = Vec::with_capacity(points.len() * ax.len());
        let mut nw = Vec::with_capacity(np.capacity());
        for (p, w) in points.iter().zip(&weights) {
            for (&x, &wx) in ax.nodes.iter().zip(&ax.weights) {
                let mut q = *p;
                q[d] = x;
                np.push(q);
                nw.push(w * wx);
            }
        }
        points = np;
        weights = nw;
    }
    PointRule {
        dim: axes.len(),
        points,
        weights,
    }
}

/// Gauss–Legendre rule along the straight segment `from → to`; weights sum to
/// its length.
pub fn segment_rule(from: &[f64], to: &[f64], n: usize) -> Result<PointRule> {
    if from.len() != to.len() || from.is_empty() || from.len() > 3 {
        return usage("segment endpoints must share a dimension between 1 and 3");
    }
    let len = from
        .iter()
        .zip(to)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt();
    if len == 0.0 {
        return usage("degenerate boundary segment");
    }
    let t = gauss_legendre(n, 0.0, 1.0)?;
    let mut points = Vec::with_capacity(n);
    for &s in &t.nodes {
        let mut p = [0.0; 3];
        for i in 0..from.len() {
            p[i] = from[i] + s * (to[i] - from[i]);
        }
        points.push(p);
    }
    PointRule::new(
        from.len(),
        points,
        t.weights.iter().map(|w| w * len).collect(),
    )
}

/// Rule on the boundary of a domain.
///
/// Interval: the two endpoints with unit weight. Rectangle: `n` nodes per
/// edge. Box: `n × n` nodes per face.
pub fn boundary_rule(domain: &Domain, n: usize) -> Result<PointRule> {
    domain.check()?;
    match *domain {
        Domain::Interval { a, b } => {
            PointRule::new(1, vec![[a, 0.0, 0.0], [b, 0.0, 0.0]], vec![1.0, 1.0])
        }
        Domain::Rectangle { lo, hi } => {
            let corners = [
                [lo[0], lo[1]],
                [hi[0], lo[1]],
                [hi[0], hi[1]],
                [lo[0], hi[1]],
            ];
            let edges = (0..4)
                .map(|i| segment_rule(&corners[i], &corners[(i + 1) % 4], n))
                .collect::<Result<Vec<_>>>()?;
            PointRule::join(edges)
        }
        Domain::Box { lo, hi } => {
            let mut faces = Vec::with_capacity(6);
            for axis in 0..3 {
                let others: Vec<usize> = (0..3).filter(|&i| i != axis).collect();
                let u = gauss_legendre(n, lo[others[0]], hi[others[0]])?;
                let v = gauss_legendre(n, lo[others[1]], hi[others[1]])?;
                for fixed in [lo[axis], hi[axis]] {
                    let face = tensor(&[u.clone(), v.clone()]);
                    let points = face
                        .points
                        .iter()
                        .map(|p| {
                            let mut q = [0.0; 3];
                            q[axis] = fixed;
                            q[others[0]] = p[0];
                            q[others[1]] = p[1];
                            q
                        })
                        .collect();
                    faces.push(PointRule::new(3, points, face.weights)?);
                }
            }
            PointRule::join(faces)
        }
    }
}

/// `n` points drawn uniformly from the box `[lo, hi]`.
pub fn mc_sample(lo: [f64; 3], hi: [f64; 3], n: usize, seed: u64) -> Result<MCSample> {
    if n == 0 {
        return usage("Monte Carlo sample needs at least one point");
    }
    if (0..3).any(|i| !(lo[i] < hi[i])) {
        return usage("Monte Carlo box has empty interior");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dists: Vec<Uniform<f64>> = (0..3).map(|i| Uniform::new(lo[i], hi[i])).collect();
    let points = (0..n)
        .map(|_| {
            let mut p = [0.0; 3];
            for (pi, d) in p.iter_mut().zip(&dists) {
                *pi = d.sample(&mut rng);
            }
            p
        })
        .collect();
    Ok(MCSample {
        lo,
        hi,
        points,
        volume: (0..3).map(|i| hi[i] - lo[i]).product(),
        seed,
    })
}

impl MCSample {
    /// Equal weights `volume / N`.
    pub fn to_points(&self) -> PointRule {
        let w = self.volume / self.points.len() as f64;
        PointRule {
            dim: 3,
            points: self.points.clone(),
            weights: vec![w; self.points.len()],
        }
    }

    /// `volume · mean f`.
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let sum: f64 = self.points.iter().map(|p| f(p)).sum();
        self.volume * sum / self.points.len() as f64
    }
}

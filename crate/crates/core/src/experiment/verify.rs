//! Self-check suite run by `varconstrain verify`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{check_gradient, curl, Jet2, Tape};
use crate::error::Result;
use crate::nets::{Network, NetworkSpec};
use crate::problems::{beltrami_field, Field, GeodesicEnds, Problem, ProblemName, QuadConfig, GS_DEFAULT};
use crate::quad;
use crate::schedule::{LRSchedule, PenaltySchedule};
use crate::solver::Solver;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check {
            name,
            passed,
            detail,
        },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

pub fn run_all() -> Vec<Check> {
    vec![
        check("parameter counts", param_counts),
        check("loss gradients vs finite differences", loss_gradients),
        check("jet derivatives vs finite differences", jet_derivatives),
        check("Gauss-Legendre exactness", gauss_exactness),
        check("helicoid area", helicoid),
        check("Solov'ev residual", solovev),
        check("Beltrami curl eigenfield", beltrami),
        check("geodesic central angle", geodesic),
        check("schedule values", schedules),
    ]
}

fn param_counts() -> Result<(bool, String)> {
    let table = [
        (NetworkSpec::lstm(50, 3, 1, 1), 21051),
        (NetworkSpec::lstm(50, 3, 2, 1), 21851),
        (NetworkSpec::lstm(50, 3, 3, 3), 22753),
        (NetworkSpec::ff(50, 3, 2, 1), 5300 + 1),
        (NetworkSpec::ff(50, 3, 1, 1), 5250 + 1),
    ];
    let bad: Vec<String> = table
        .iter()
        .filter(|(s, n)| s.param_count() != *n)
        .map(|(s, n)| format!("{s}: {} != {n}", s.param_count()))
        .collect();
    Ok((bad.is_empty(), bad.join("; ")))
}

fn small_quad() -> QuadConfig {
    QuadConfig {
        n1d: 6,
        n2d: 4,
        nface: 2,
        mc_points: 8,
        error_n3d: 2,
        ..QuadConfig::default()
    }
}

fn loss_gradients() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for (i, name) in ProblemName::ALL.into_iter().enumerate() {
        let p = Problem::build(name, &small_quad(), GeodesicEnds::DEFAULT)?;
        for spec in [
            NetworkSpec::lstm(3, 2, p.input_dim(), p.output_dim()),
            NetworkSpec::ff(4, 2, p.input_dim(), p.output_dim()),
        ] {
            let net = Network::init(spec, 10 + i as u64)?;
            let d = check_gradient(
                |t, v| Solver::build_loss(&p, &spec, t, v, 150.0, None),
                &net.params,
                1e-6,
            )?;
            worst = worst.max(d);
        }
    }
    Ok((worst < 1e-5, format!("max relative deviation {worst:.2e}")))
}

fn jet_derivatives() -> Result<(bool, String)> {
    let spec = NetworkSpec::lstm(5, 2, 2, 1);
    let net = Network::init(spec, 3)?;
    let x = [0.3, -0.4];
    let mut t = Tape::new();
    let u = net.eval_jets(&mut t, &Jet2::lift_point(&x, 2))?;
    let f = |y: [f64; 2]| net.eval(&y).map(|v| v[0]);
    let h = 1e-4;
    let mut worst = 0.0f64;
    for i in 0..2 {
        let mut up = x;
        let mut dn = x;
        up[i] += h;
        dn[i] -= h;
        let g = (f(up)? - f(dn)?) / (2.0 * h);
        worst = worst.max((u[0].grad(i).value() - g).abs());
        for j in 0..2 {
            let e = |a: f64, b: f64| {
                let mut y = x;
                y[i] += a;
                y[j] += b;
                f(y)
            };
            let hij = (e(h, h)? - e(h, -h)? - e(-h, h)? + e(-h, -h)?) / (4.0 * h * h);
            worst = worst.max((u[0].hess(i, j).value() - hij).abs());
        }
    }
    Ok((worst < 1e-4, format!("max deviation {worst:.2e}")))
}

fn gauss_exactness() -> Result<(bool, String)> {
    let r = quad::gauss_legendre(8, -1.0, 2.0)?;
    let got = r.integrate(|x| x.powi(15));
    let want = (2f64.powi(16) - 1.0) / 16.0;
    let rel = (got - want).abs() / want;
    Ok((rel < 1e-13, format!("x^15 relative error {rel:.2e}")))
}

fn helicoid() -> Result<(bool, String)> {
    let q = QuadConfig {
        n2d: 64,
        ..QuadConfig::default()
    };
    let p = Problem::build(ProblemName::MinimalSurface, &q, GeodesicEnds::DEFAULT)?;
    let f = p.objective_on(&mut Tape::new(), p.interior(), &Field::Truth)?.value();
    let want = 2.0 * PI * (2f64.sqrt() + (1.0 + 2f64.sqrt()).ln());
    Ok(((f - want).abs() < 1e-6, format!("|f - closed form| = {:.2e}", (f - want).abs())))
}

fn solovev() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut t = Tape::new();
    for _ in 0..100 {
        let x = [rng.gen_range(0.6..1.4), rng.gen_range(-0.2..0.2)];
        let u = GS_DEFAULT.solovev_jet(&mut t, &Jet2::lift_point(&x, 2))?;
        worst = worst.max(GS_DEFAULT.residual(&mut t, &x, &u).value().abs());
        t.reset();
    }
    let p = Problem::build(ProblemName::GradShafranov, &QuadConfig::default(), GeodesicEnds::DEFAULT)?;
    let f = p.objective_on(&mut t, p.interior(), &Field::Truth)?.value();
    Ok((
        worst < 1e-12 && f < 1e-10,
        format!("max residual {worst:.2e}, f(truth) {f:.2e}"),
    ))
}

fn beltrami() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut t = Tape::new();
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let b = beltrami_field(&mut t, &Jet2::lift_point(&x, 1));
        let c = curl(&mut t, &b)?;
        for k in 0..3 {
            worst = worst.max((c[k].value() - b[k].value()).abs());
        }
        t.reset();
    }
    let mc = quad::mc_sample([-0.5; 3], [0.5; 3], 100_000, 11)?;
    let e = mc.integrate(|x| {
        let u = [
            x[2].sin() + x[1].cos(),
            x[0].sin() + x[2].cos(),
            x[1].sin() + x[0].cos(),
        ];
        0.5 * u.iter().map(|v| v * v).sum::<f64>()
    });
    let rel = (e - 1.5).abs() / 1.5;
    Ok((
        worst < 1e-12 && rel < 0.01,
        format!("curl deviation {worst:.2e}, energy relative error {rel:.2e}"),
    ))
}

fn geodesic() -> Result<(bool, String)> {
    let p = Problem::build(ProblemName::Geodesic, &QuadConfig::default(), GeodesicEnds::DEFAULT)?;
    let f = p.objective_on(&mut Tape::new(), p.interior(), &Field::Truth)?.value();
    let d = (f - 2.0 * PI / 3.0).abs();
    Ok((d < 1e-8, format!("|f - 2π/3| = {d:.2e}")))
}

fn schedules() -> Result<(bool, String)> {
    let ms = PenaltySchedule {
        mu1: 100.0,
        r: 1.01,
        mu_max: 5000.0,
    };
    let lr = LRSchedule::from_rates(1e-4, 1e-1, None, None, 20000, 1000, &ms)?;
    let geo = PenaltySchedule {
        mu1: 100.0,
        r: 1.01,
        mu_max: 500.0,
    };
    let geo_lr = LRSchedule::from_rates(1e-3, 1e-1, Some(1e-4), Some(1e-2), 50000, 2500, &geo)?;
    let ok = ms.mu(1) == 100.0
        && (ms.mu(2) - 101.0).abs() < 1e-12
        && ms.mu(394) < 5000.0
        && ms.mu(395) == 5000.0
        && lr.delta(0)? == 1e-4
        && lr.delta(40)? == 1e-4
        && (lr.delta(20)? - 1e-4 * 10f64.powf(-0.5)).abs() < 1e-18
        && geo_lr.t == 15841;
    Ok((ok, format!("T(geodesic) = {}", geo_lr.t)))
}

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_varconstrain"));
    c.env_remove("VARCONSTRAIN_SEED").env("RUST_LOG", "warn");
    c
}

const TINY: &str = "E = 200\nP = 10\nlog_every = 20\nnet.solution = \"LSTM(4, 1, 1, 1)\"\nquad.n1d = 8\n";

fn tiny_run(dir: &Path, extra: &[&str]) -> std::process::Output {
    let cfg = dir.join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    bin()
        .args(["run", "--problem", "geodesic", "--method", "penalty", "--preset", "desk"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

#[test]
fn run_writes_artifacts() {
    let d = tempfile::tempdir().unwrap();
    let o = tiny_run(d.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = d.path().join("out");
    let csv = std::fs::read_to_string(out.join("errors.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "iteration,wall_time_s,loss,mu,absolute_error,relative_objective_error,constraint_error"
    );
    assert_eq!(lines.len(), 11);
    assert!(lines[1].starts_with("20,"));
    assert!(out.join("checkpoint.json").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["q"], 20);
    assert_eq!(summary["finished"], true);
}

#[test]
fn identical_seeds_identical_csv() {
    let strip = |p: &Path| -> Vec<String> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f.remove(1);
                f.join(",")
            })
            .collect()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(tiny_run(a.path(), &["--seed", "9"]).status.success());
    assert!(tiny_run(b.path(), &["--seed", "9"]).status.success());
    assert_eq!(
        strip(&a.path().join("out/errors.csv")),
        strip(&b.path().join("out/errors.csv"))
    );
}

#[test]
fn stop_resume_and_report() {
    let d = tempfile::tempdir().unwrap();
    let o = tiny_run(d.path(), &["--stop-after", "3"]);
    assert!(o.status.success());
    let out = d.path().join("out");
    let o = bin().arg("resume").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = bin().arg("report").arg(&out).arg(&out).output().unwrap();
    assert!(o.status.success());
    for f in [
        "absolute_error.dat",
        "relative_objective_error.dat",
        "constraint_error.dat",
        "wall_time.dat",
        "comparison.dat",
        "speedup.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("speedup 1.000"));
}

#[test]
fn invalid_config_fails() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("bad.toml");
    std::fs::write(&cfg, "E = 200\nP = 7\n").unwrap();
    let o = bin()
        .args(["run", "--problem", "geodesic", "--method", "penalty", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(d.path().join("out"))
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("must divide"));
    let o = bin()
        .args(["run", "--problem", "geodesic", "--method", "al-inf", "--preset", "desk"])
        .arg("--out")
        .arg(d.path().join("out2"))
        .output()
        .unwrap();
    assert!(!o.status.success());
    let o = bin().args(["run", "--problem", "nowhere", "--method", "penalty"]).output().unwrap();
    assert!(!o.status.success());
}

#[test]
fn verify_passes() {
    let o = bin().arg("verify").output().unwrap();
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 9);
}

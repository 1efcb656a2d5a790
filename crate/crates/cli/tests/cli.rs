use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn sphk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sphk"))
        .args(args)
        .env_remove("SPHK_CONFIG")
        .output()
        .expect("spawn sphk")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Second line of a two-line CSV answer, split on commas.
fn csv_row(o: &Output) -> Vec<String> {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(o);
    let mut lines = s.lines();
    lines.next().unwrap();
    lines.next().unwrap().split(',').map(str::to_string).collect()
}

/// theta_t(phi) on the circle by direct image sum.
fn circle(t: f64, phi: f64) -> f64 {
    (-50..=50)
        .map(|k| {
            let x = phi + 2.0 * PI * k as f64;
            (-x * x / (4.0 * t)).exp()
        })
        .sum::<f64>()
        / (4.0 * PI * t).sqrt()
}

// the literals match the arguments passed on the command line
#[allow(clippy::approx_constant)]
#[test]
fn eval_values() {
    let r = csv_row(&sphk(&["eval", "--dim", "1", "--time", "1", "--angle", "0"]));
    let v: f64 = r[3].parse().unwrap();
    assert!((v - circle(1.0, 0.0)).abs() < 1e-14);
    assert!((v - 0.2821240).abs() < 5e-8);

    // S^3 at t = 1 from the Gegenbauer series sum (n+1) sin((n+1)phi) e^{-n(n+2)t} / (2 pi^2 sin phi)
    let p = 1.5707963f64;
    let s3: f64 = (0..40)
        .map(|n| {
            let k = (n + 1) as f64;
            k * (k * p).sin() * (-(n * (n + 2)) as f64).exp()
        })
        .sum::<f64>()
        / (2.0 * PI * PI * p.sin());
    let o = sphk(&["--format", "json", "eval", "--dim", "3", "--time", "1", "--angle", "1.5707963"]);
    assert!(o.status.success());
    let j: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((j["value"].as_f64().unwrap() / s3 - 1.0).abs() < 1e-12);
    assert!(j["method"].is_string() && j["work"].is_u64() && j["est_rel_error"].is_f64());
}

#[allow(clippy::approx_constant)]
#[test]
fn eval_log_far_tail() {
    let (t, phi) = (1e-4, 3.14159265f64);
    let r = csv_row(&sphk(&["eval", "--dim", "1", "--time", "1e-4", "--angle", "3.14159265", "--log"]));
    let lv: f64 = r[3].parse().unwrap();
    assert_eq!(r[4], "1");
    // the two images closest to phi, in log form
    let a = -phi * phi / (4.0 * t);
    let b = -(2.0 * PI - phi).powi(2) / (4.0 * t);
    let m = a.max(b);
    let want = m + ((a - m).exp() + (b - m).exp()).ln() - 0.5 * (4.0 * PI * t).ln();
    assert!((lv - want).abs() < 1e-9 * want.abs(), "{lv} vs {want}");
}

#[test]
fn degrees_convert_on_input() {
    let a = csv_row(&sphk(&["eval", "--dim", "2", "--time", "0.3", "--angle", "90", "--degrees"]));
    let b = csv_row(&sphk(&["eval", "--dim", "2", "--time", "0.3", "--angle", &(PI / 2.0).to_string()]));
    assert_eq!(a[2], b[2]);
    assert_eq!(a[3], b[3]);
}

#[test]
fn exit_codes() {
    assert_eq!(sphk(&["eval", "--dim", "0", "--time", "1", "--angle", "0"]).status.code(), Some(2));
    assert_eq!(sphk(&["eval", "--dim", "2", "--time", "-1", "--angle", "0"]).status.code(), Some(2));
    assert_eq!(
        sphk(&["eval", "--dim", "2", "--time", "1", "--angle", "0", "--method", "theta"]).status.code(),
        Some(2)
    );
    let o = sphk(&["eval", "--dim", "41", "--time", "0.1", "--angle", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(o.stdout.is_empty());
    let o = sphk(&[
        "scan", "--dim", "2", "--t-min", "0.1", "--t-max", "1", "--t-points", "2", "--phi-points", "16", "--out",
        "/nonexistent-dir/scan.csv",
    ]);
    assert_eq!(o.status.code(), Some(5));
    assert!(!o.stderr.is_empty());
}

fn scan_to(path: &Path, threads: &str) -> Vec<u8> {
    let o = sphk(&[
        "--threads", threads, "scan", "--dim", "4", "--t-min", "1e-4", "--t-max", "1", "--t-points", "7",
        "--phi-points", "33", "--out", path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read(path).unwrap()
}

#[test]
fn scan_format_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = scan_to(&dir.path().join("a.csv"), "1");
    let b = scan_to(&dir.path().join("b.csv"), "1");
    let c = scan_to(&dir.path().join("c.csv"), "3");
    assert_eq!(a, b);
    assert_eq!(a, c);
    let text = String::from_utf8(a).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "d,t,phi,log_kernel,log_envelope,ratio");
    assert_eq!(lines.len() - 1, 7 * 33);
    // t-major order
    let t: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(t.windows(2).all(|w| w[0] <= w[1]));
    for l in &lines[1..] {
        let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(f.len(), 6);
        assert!(((f[3] - f[4]).exp() / f[5] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn sample_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let p = dir.path().join(name);
        let args = ["sample", "--dim", "2", "--time", "0.5", "--n", "1000", "--seed", seed, "--out", p.to_str().unwrap()];
        assert!(sphk(&args).status.success());
        std::fs::read_to_string(p).unwrap()
    };
    let a = run("a.csv", "7");
    let b = run("b.csv", "7");
    let c = run("c.csv", "8");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "step,x0,x1,x2");
    assert_eq!(lines.len(), 1002);
    for l in &lines[1..] {
        let x: Vec<f64> = l.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        let norm: f64 = x.iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}

#[test]
fn verify_quick_circle() {
    let start = Instant::now();
    let o = sphk(&["--format", "json", "verify", "--dims", "1", "--profile", "quick"]);
    assert!(start.elapsed().as_secs_f64() < 10.0);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let j: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(j["passed"], true);
    let reports = j["ratio_reports"].as_array().unwrap();
    assert!(!reports.is_empty());
    assert!(reports[0]["inf_ratio"].as_f64().unwrap() > 0.0);
    assert!(reports[0]["sup_ratio"].as_f64().unwrap().is_finite());
}

#[test]
fn verify_corrupted_envelope_fails() {
    let o = sphk(&["verify", "--dims", "1", "--profile", "quick", "--envelope-exponent-scale", "1.01"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().any(|l| l.starts_with("FAIL") && l.contains("7a")));
}

#[test]
fn selftest_passes() {
    let o = sphk(&["selftest"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).lines().all(|l| !l.starts_with("FAIL")));
}

#[test]
fn bench_reports_rates() {
    let o = sphk(&["--format", "json", "bench", "--profile", "quick"]);
    assert!(o.status.success());
    let rows: Vec<serde_json::Value> = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(rows.iter().any(|r| r["kind"] == "eval" && r["d"] == 3 && r["method"] == "auto"));
    assert!(rows.iter().any(|r| r["kind"] == "scan"));
    assert!(rows.iter().all(|r| r["per_second"].as_f64().unwrap() > 0.0));
}

#[test]
fn config_file_and_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sphk.ini");
    std::fs::write(&cfg, "[output]\nformat = json\n").unwrap();
    let args = ["eval", "--dim", "2", "--time", "0.5", "--angle", "1"];

    // from the environment
    let o = Command::new(env!("CARGO_BIN_EXE_sphk")).args(args).env("SPHK_CONFIG", &cfg).output().unwrap();
    assert!(serde_json::from_str::<serde_json::Value>(&stdout(&o)).is_ok());

    // a flag beats the file
    let mut with_flag = vec!["--config", cfg.to_str().unwrap(), "--format", "csv"];
    with_flag.extend(args);
    assert!(stdout(&sphk(&with_flag)).starts_with("d,t,phi,value"));

    std::fs::write(&cfg, "[eval]\nepsilon = 1e-9\n").unwrap();
    let mut bad = vec!["--config", cfg.to_str().unwrap()];
    bad.extend(args);
    let o = sphk(&bad);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key"));

    let o = sphk(&["--config", dir.path().join("missing.ini").to_str().unwrap(), "selftest"]);
    assert_eq!(o.status.code(), Some(5));
}

mod config;

use std::f64::consts::PI;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sphere_heat::bm_sampler::{sample_path, write_path_csv, Sampler};
use sphere_heat::bounds::{format_float, scan_grid, write_csv, ScanSpec};
use sphere_heat::sphere_kernel::{kernel_derivative_eval, kernel_eval, EvalConfig, KernelQuery, Method};
use sphere_heat::verify::{selftest, verify_with, Outcome, Profile, Status, VerifyOptions};
use sphere_heat::{Error, Result};

use config::{Config, Format};

#[derive(Parser)]
#[command(name = "sphk", version, about = "Heat kernel on the d-sphere")]
struct Cli {
    /// INI config file; defaults to $SPHK_CONFIG when set.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for scans and sampling [default: all cores].
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate K_t^d(phi).
    Eval(EvalArgs),
    /// Write the kernel/envelope ratio grid as CSV.
    Scan(ScanArgs),
    /// Run the numbered acceptance checks.
    Verify(VerifyArgs),
    /// Dump a seeded Brownian path.
    Sample(SampleArgs),
    /// Run the invariant self-test.
    Selftest,
    /// Evaluation and scan throughput.
    Bench(BenchArgs),
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    time: f64,
    /// Geodesic angle, in radians unless --degrees.
    #[arg(long, allow_hyphen_values = true)]
    angle: f64,
    #[arg(long)]
    degrees: bool,
    #[arg(long, default_value = "auto")]
    method: Method,
    /// Print log|K| and the sign instead of K.
    #[arg(long)]
    log: bool,
    /// Evaluate dK/dphi instead.
    #[arg(long)]
    derivative: bool,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    t_min: f64,
    #[arg(long)]
    t_max: f64,
    #[arg(long)]
    t_points: usize,
    #[arg(long)]
    phi_points: usize,
    /// Scan -dK/dphi against the derivative envelope.
    #[arg(long)]
    derivative: bool,
    /// Use the large-time envelopes.
    #[arg(long)]
    large_t: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Dimensions as a range `1..6` or a list `1,3,5`.
    #[arg(long, default_value = "1..6")]
    dims: String,
    #[arg(long, default_value = "full")]
    profile: Profile,
    /// Multiplies the envelope exponent; for checking that the harness can fail.
    #[arg(long, default_value_t = 1.0, hide = true)]
    envelope_exponent_scale: f64,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    time: f64,
    /// Number of steps.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "quick")]
    profile: Profile,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::Pole { .. } => 2,
        Error::Capability { .. } => 3,
        Error::Accuracy { .. } | Error::Integrity(_) => 4,
        Error::Io(_) => 5,
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_dims(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Domain(format!("cannot parse dimensions '{s}'"));
    if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a == 0 || a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    let dims: Vec<usize> = s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
    if dims.is_empty() || dims.contains(&0) {
        return Err(bad());
    }
    Ok(dims)
}

fn cmd_eval(a: &EvalArgs, cfg: &Config) -> Result<()> {
    let phi = if a.degrees { a.angle.to_radians() } else { a.angle };
    let q = KernelQuery::new(a.dim, a.time, phi)?;
    let r = if a.derivative {
        kernel_derivative_eval(&q, &cfg.eval, a.method)?
    } else {
        kernel_eval(&q, &cfg.eval, a.method)?
    };
    if r.warning {
        eprintln!("warning: {} path used outside its accurate range", r.method);
    }
    let value = r.value.to_f64();
    if !a.log && value == 0.0 && !r.value.is_zero() {
        eprintln!("warning: value underflows f64; use --log");
    }
    let mut out = open_out(cfg.output.as_deref())?;
    let (d, t, p) = (a.dim.to_string(), format_float(a.time), format_float(phi));
    let (method, work, err) = (r.method.to_string(), r.work.to_string(), format_float(r.est_rel_error));
    match (cfg.format, a.log) {
        (Format::Json, false) => writeln!(
            out,
            "{}",
            json!({"d": a.dim, "t": a.time, "phi": phi, "value": value, "method": method,
                   "work": r.work, "est_rel_error": r.est_rel_error})
        )?,
        (Format::Json, true) => writeln!(
            out,
            "{}",
            json!({"d": a.dim, "t": a.time, "phi": phi, "log_value": r.value.log_abs(),
                   "sign": r.value.sign().as_i8(), "method": method, "work": r.work,
                   "est_rel_error": r.est_rel_error})
        )?,
        (Format::Csv, false) => {
            writeln!(out, "d,t,phi,value,method,work,est_rel_error")?;
            writeln!(out, "{d},{t},{p},{},{method},{work},{err}", format_float(value))?;
        }
        (Format::Csv, true) => {
            writeln!(out, "d,t,phi,log_value,sign,method,work,est_rel_error")?;
            writeln!(
                out,
                "{d},{t},{p},{},{},{method},{work},{err}",
                format_float(r.value.log_abs()),
                r.value.sign().as_i8()
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_scan(a: &ScanArgs, cfg: &Config) -> Result<()> {
    let mut spec = ScanSpec::kernel(a.dim, a.t_min, a.t_max, a.t_points, a.phi_points);
    spec.derivative = a.derivative;
    spec.large_t = a.large_t;
    let rows = scan_grid(&spec, &cfg.eval)?;
    let path = a.out.as_deref().or(cfg.output.as_deref());
    write_csv(&rows, open_out(path)?)
}

fn print_outcomes(outcomes: &[Outcome], format: Format) -> Result<()> {
    let mut out = io::stdout().lock();
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(outcomes).map_err(|e| Error::Io(e.to_string()))?)?,
        Format::Csv => {
            for o in outcomes {
                writeln!(out, "{}", o.line())?;
            }
        }
    }
    Ok(())
}

/// Returns whether every criterion passed.
fn cmd_verify(a: &VerifyArgs, cfg: &Config) -> Result<bool> {
    let mut opts = VerifyOptions {
        dims: parse_dims(&a.dims)?,
        profile: a.profile,
        envelope_exponent_scale: a.envelope_exponent_scale,
        eval: cfg.eval,
        ..VerifyOptions::default()
    };
    if let Some(seed) = cfg.seed {
        opts.seed = seed;
    }
    let report = verify_with(&opts, |o| eprintln!("{}", o.line()))?;
    match cfg.format {
        Format::Json => {
            let s = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
            println!("{s}");
        }
        Format::Csv => {
            print_outcomes(&report.criteria, Format::Csv)?;
            println!("d,derivative,inf_ratio,sup_ratio,drift");
            for r in &report.ratio_reports {
                println!(
                    "{},{},{},{},{}",
                    r.d,
                    r.derivative,
                    format_float(r.inf_ratio),
                    format_float(r.sup_ratio),
                    format_float(r.drift())
                );
            }
        }
    }
    let failed = report.criteria.iter().filter(|o| !o.passed()).count();
    eprintln!(
        "{}: {} of {} criteria passed",
        if report.passed { "ok" } else { "FAILED" },
        report.criteria.len() - failed,
        report.criteria.len()
    );
    Ok(report.passed)
}

fn cmd_sample(a: &SampleArgs, cfg: &Config) -> Result<()> {
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let sampler = Sampler::new(a.dim, a.time, &cfg.eval)?;
    let path = sample_path(&sampler, a.n, seed);
    let out = open_out(a.out.as_deref().or(cfg.output.as_deref()))?;
    match cfg.format {
        Format::Csv => write_path_csv(&path, out),
        Format::Json => {
            let coords: Vec<&[f64]> = path.iter().map(|p| p.coords()).collect();
            let mut out = out;
            serde_json::to_writer(&mut out, &coords).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(out)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn cmd_selftest(cfg: &Config) -> Result<bool> {
    let outcomes = selftest(&cfg.eval);
    print_outcomes(&outcomes, cfg.format)?;
    Ok(outcomes.iter().all(|o| o.status != Status::Fail))
}

/// Evaluations per second of one method, run for about `budget` seconds.
fn method_rate(d: usize, t: f64, method: Method, budget: f64, cfg: &EvalConfig) -> Result<f64> {
    let start = Instant::now();
    let mut n = 0usize;
    let mut sink = 0.0;
    while n < 64 || start.elapsed().as_secs_f64() < budget {
        let phi = PI * ((n % 997) as f64 + 0.5) / 997.0;
        sink += kernel_eval(&KernelQuery::new(d, t, phi)?, cfg, method)?.value.log_abs();
        n += 1;
    }
    std::hint::black_box(sink);
    Ok(n as f64 / start.elapsed().as_secs_f64())
}

fn cmd_bench(a: &BenchArgs, cfg: &Config) -> Result<()> {
    let full = a.profile == Profile::Full;
    let budget = if full { 1.0 } else { 0.2 };
    let mut rows = Vec::new();
    for d in 1..=6usize {
        let mut methods = vec![Method::Auto, Method::Series];
        methods.push(if d % 2 == 1 { Method::Theta } else { Method::Reduction });
        for &t in &[0.1, 2.0] {
            for &m in &methods {
                let rate = method_rate(d, t, m, budget, &cfg.eval)?;
                rows.push(json!({"kind": "eval", "method": m.to_string(), "d": d, "t": t, "per_second": rate}));
                if d == 3 && t == 0.1 && m == Method::Auto && rate < 2e5 {
                    eprintln!("warning: {rate:.3e} evaluations/s at d=3, t=0.1 is below the 2e5 target");
                }
            }
        }
    }
    let side = if full { 1000 } else { 316 };
    let spec = ScanSpec::kernel(3, 1e-6, 1.0, side, side);
    let start = Instant::now();
    let scanned = scan_grid(&spec, &cfg.eval)?.len();
    let secs = start.elapsed().as_secs_f64();
    if full && secs > 5.0 {
        eprintln!("warning: {scanned}-point scan took {secs:.2} s, target is 5 s");
    }
    rows.push(json!({"kind": "scan", "method": "auto", "d": 3, "points": scanned, "seconds": secs,
                     "per_second": scanned as f64 / secs, "threads": rayon::current_num_threads()}));
    let mut out = open_out(cfg.output.as_deref())?;
    match cfg.format {
        Format::Json => writeln!(out, "{}", serde_json::Value::Array(rows))?,
        Format::Csv => {
            writeln!(out, "kind,method,d,t,points,seconds,per_second")?;
            for r in &rows {
                let f = |k: &str| r.get(k).map(|v| v.to_string().trim_matches('"').to_string()).unwrap_or_default();
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    f("kind"),
                    f("method"),
                    f("d"),
                    f("t"),
                    f("points"),
                    f("seconds"),
                    format_float(r["per_second"].as_f64().unwrap_or(f64::NAN))
                )?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    if let Some(k) = cli.threads {
        cfg.threads = Some(k);
    }
    if let Some(k) = cfg.threads {
        if k == 0 {
            return Err(Error::Domain("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Error::Domain(e.to_string()))?;
    }
    match &cli.cmd {
        Cmd::Eval(a) => cmd_eval(a, &cfg).map(|_| true),
        Cmd::Scan(a) => cmd_scan(a, &cfg).map(|_| true),
        Cmd::Verify(a) => cmd_verify(a, &cfg),
        Cmd::Sample(a) => cmd_sample(a, &cfg).map(|_| true),
        Cmd::Selftest => cmd_selftest(&cfg),
        Cmd::Bench(a) => cmd_bench(a, &cfg).map(|_| true),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
